//! Monte Carlo orchestration: every (policy, replication) cell runs one
//! episode with its own random streams, then traces are written and
//! aggregated single-threaded.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vbts::diagnostics::contraction_trace;
use vbts::env::{generate_beta, EnvSpec};
use vbts::policies::{
    run_episode, EpisodeOptions, Estc, LassoL1, LinTs, LinUcb, Oracle, Policy, RegretTrace, UniformRandom, Vbts,
};
use vbts::seeded_rng;

use crate::config::{DataSource, EnvConfig, ExperimentConfig, PolicyConfig};
use crate::error::{HarnessError, Result};
use crate::ingest::{dataset_env, fit_bundle, generate_mimic, read_labelled_csv, DatasetBundle, Transform};
use crate::plot::emit_plot;
use crate::report::{mean_sd, summarize_policy, write_summary_csv, write_trace_csv, Summary};
use crate::seeds::{env_seed, policy_seed, stable_hash};

/// Name of the environment variable that sets the output root.
pub const OUTPUT_ROOT_VAR: &str = "VBTS_OUTPUT_ROOT";

/// Output root from the environment, defaulting to `./results`.
pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("results"))
}

pub struct Environment {
    pub spec: EnvSpec,
    pub bundle: Option<DatasetBundle>,
}

/// Realise the configured environment. Relative data paths resolve against
/// `config_dir`.
pub fn build_environment(cfg: &ExperimentConfig, config_dir: &Path) -> Result<Environment> {
    match &cfg.env {
        EnvConfig::Synthetic(s) => {
            let seed = s.beta_seed.unwrap_or_else(|| stable_hash(cfg.base_seed, "\u{0}beta", 0));
            let beta = generate_beta(s.dim, s.sparsity, s.beta_scheme, &mut seeded_rng(seed))?;
            let mut spec =
                EnvSpec::new(s.num_arms, s.contexts.to_dist(), beta, s.noise_sigma)?.with_noise_law(s.noise_law);
            if let Some(x_max) = s.clip_x_max {
                spec = spec.with_clip(x_max)?;
            }
            Ok(Environment { spec, bundle: None })
        }
        EnvConfig::Dataset(d) => {
            let table = match &d.source {
                DataSource::Csv { path, label_col, log2 } => {
                    let path = if path.is_absolute() { path.clone() } else { config_dir.join(path) };
                    let transform = if *log2 { Transform::Log2 } else { Transform::None };
                    read_labelled_csv(&path, label_col, transform)?
                }
                DataSource::Mimic { seed } => generate_mimic(*seed).table,
            };
            let bundle = fit_bundle(table, d.cv_folds)?;
            let spec = dataset_env(&bundle, d.noise_sigma)?;
            Ok(Environment { spec, bundle: Some(bundle) })
        }
    }
}

pub fn make_policy(cfg: &PolicyConfig, env: &EnvSpec, horizon: usize) -> Result<Box<dyn Policy>> {
    let d = env.dim;
    Ok(match cfg {
        PolicyConfig::Vbts(c) => Box::new(Vbts::new(c.clone(), d)?),
        PolicyConfig::Lints(c) => Box::new(LinTs::new(c.clone(), d)),
        PolicyConfig::Linucb(c) => Box::new(LinUcb::new(c.clone(), d)),
        PolicyConfig::Estc(c) => Box::new(Estc::new(c.clone(), d, horizon)),
        PolicyConfig::LassoL1(c) => Box::new(LassoL1::new(c.clone(), d)),
        PolicyConfig::Uniform => Box::new(UniformRandom::new(d)),
        PolicyConfig::Oracle => Box::new(Oracle::new(env.beta_star.clone())),
    })
}

fn run_cell(cfg: &ExperimentConfig, env: &EnvSpec, policy: &PolicyConfig, rep: usize) -> RegretTrace {
    let name = policy.name();
    let options = EpisodeOptions { log_every: cfg.log_every, ..EpisodeOptions::new(cfg.horizon) };
    let mut env_rng = seeded_rng(env_seed(cfg.base_seed, rep));
    let mut policy_rng = seeded_rng(policy_seed(cfg.base_seed, name, rep));
    let failed = |msg: String| RegretTrace {
        policy: name.to_string(),
        replication: rep,
        rounds: Vec::new(),
        estimate_log: Vec::new(),
        error: Some(msg),
        total_seconds: 0.0,
    };
    let mut agent = match make_policy(policy, env, cfg.horizon) {
        Ok(a) => a,
        Err(e) => return failed(e.to_string()),
    };
    match run_episode(agent.as_mut(), env, &options, rep, &mut env_rng, &mut policy_rng) {
        Ok(mut trace) => {
            trace.policy = name.to_string();
            trace
        }
        Err(e) => failed(e.to_string()),
    }
}

/// Run every (policy, replication) cell, in parallel up to the configured
/// degree. Results are ordered by policy then replication.
pub fn run_cells(cfg: &ExperimentConfig, env: &EnvSpec) -> Result<Vec<RegretTrace>> {
    for p in &cfg.policies {
        make_policy(p, env, cfg.horizon)?;
    }
    let cells: Vec<(usize, usize)> =
        (0..cfg.policies.len()).flat_map(|p| (0..cfg.replications).map(move |r| (p, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| cells.par_iter().map(|&(p, r)| run_cell(cfg, env, &cfg.policies[p], r)).collect()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub policy: String,
    pub replication: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub policy: String,
    pub mean_seconds_per_episode: f64,
    pub mean_seconds_per_round: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AccuracyRow {
    pub policy: String,
    pub mean: f64,
    pub sd: f64,
    pub per_replication: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    Partial,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Success => 0,
            RunStatus::Partial => 1,
        }
    }
}

pub struct RunReport {
    pub output_dir: PathBuf,
    pub traces: Vec<RegretTrace>,
    pub summary: Summary,
    pub timing: Vec<TimingRow>,
    pub accuracy: Vec<AccuracyRow>,
    pub failures: Vec<Failure>,
    pub beta_star: Vec<f64>,
}

impl RunReport {
    pub fn status(&self) -> RunStatus {
        if self.failures.is_empty() {
            RunStatus::Success
        } else {
            RunStatus::Partial
        }
    }
}

/// Resolve the configured output directory against `root`.
pub fn resolve_output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    if cfg.output_dir.is_absolute() {
        cfg.output_dir.clone()
    } else {
        root.join(&cfg.output_dir)
    }
}

/// Run an experiment and write its result bundle:
///
/// * `traces/<policy>_rep<r>.csv`, one per cell;
/// * `summary.csv` with per-round means and 95% bands;
/// * `timing.csv`, `regret.svg` and `manifest.json`;
/// * `accuracy.csv` for dataset environments and `contraction.csv` when
///   estimates are logged.
pub fn run_experiment(cfg: &ExperimentConfig, config_dir: &Path, root: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let started = std::time::SystemTime::now();
    let env = build_environment(cfg, config_dir)?;
    let traces = run_cells(cfg, &env.spec)?;
    let out = resolve_output_dir(cfg, root);
    let trace_dir = out.join("traces");
    std::fs::create_dir_all(&trace_dir).map_err(|e| HarnessError::io(&trace_dir, e))?;

    let mut failures = Vec::new();
    for trace in &traces {
        let path = trace_dir.join(format!("{}_rep{:03}.csv", trace.policy, trace.replication));
        write_trace_csv(trace, &path, cfg.record_micros)?;
        if let Some(e) = &trace.error {
            failures.push(Failure { policy: trace.policy.clone(), replication: trace.replication, error: e.clone() });
        }
    }

    let mut summary = Summary::default();
    let mut timing = Vec::new();
    let mut accuracy = Vec::new();
    for p in &cfg.policies {
        let done: Vec<&RegretTrace> = traces.iter().filter(|t| t.policy == p.name() && t.error.is_none()).collect();
        if done.is_empty() {
            continue;
        }
        summary.series.push(summarize_policy(p.name(), &done));
        let episodes: Vec<f64> = done.iter().map(|t| t.total_seconds).collect();
        let rounds: Vec<f64> = done.iter().map(|t| t.mean_round_seconds()).collect();
        timing.push(TimingRow {
            policy: p.name().to_string(),
            mean_seconds_per_episode: mean_sd(&episodes).0,
            mean_seconds_per_round: mean_sd(&rounds).0,
            replications: done.len(),
        });
        let acc: Vec<f64> = done.iter().filter_map(|t| t.accuracy()).collect();
        if !acc.is_empty() {
            let (mean, sd) = mean_sd(&acc);
            accuracy.push(AccuracyRow { policy: p.name().to_string(), mean, sd, per_replication: acc });
        }
    }
    write_summary_csv(&summary, &out.join("summary.csv"))?;
    write_timing_csv(&timing, &out.join("timing.csv"))?;
    if !accuracy.is_empty() {
        write_accuracy_csv(&accuracy, &out.join("accuracy.csv"))?;
    }
    if cfg.log_every.is_some() {
        write_contraction_csv(&traces, &env.spec.beta_star, &out.join("contraction.csv"))?;
    }
    if !summary.series.is_empty() {
        emit_plot(&summary, &out.join("regret.svg"))?;
    }

    let report = RunReport {
        output_dir: out.clone(),
        traces,
        summary,
        timing,
        accuracy,
        failures,
        beta_star: env.spec.beta_star.clone(),
    };
    write_manifest(cfg, &report, env.bundle.as_ref(), started, &out.join("manifest.json"))?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()).map_err(|e| HarnessError::io(&out, e))?;
    Ok(report)
}

fn write_timing_csv(rows: &[TimingRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["policy", "mean_seconds_per_episode", "mean_seconds_per_round", "replications"])?;
    for r in rows {
        w.write_record([
            r.policy.clone(),
            format!("{:.6}", r.mean_seconds_per_episode),
            format!("{:.9}", r.mean_seconds_per_round),
            r.replications.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

fn write_accuracy_csv(rows: &[AccuracyRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["policy", "rep", "accuracy"])?;
    for r in rows {
        for (rep, a) in r.per_replication.iter().enumerate() {
            w.write_record([r.policy.clone(), rep.to_string(), crate::report::fmt17(*a)])?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

fn write_contraction_csv(traces: &[RegretTrace], beta_star: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["policy", "rep", "t", "l1_error"])?;
    for trace in traces {
        let report = contraction_trace(&trace.estimate_log, beta_star)?;
        for (t, e) in report.rounds.iter().zip(&report.l1_errors) {
            w.write_record([
                trace.policy.clone(),
                trace.replication.to_string(),
                t.to_string(),
                crate::report::fmt17(*e),
            ])?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    status: RunStatus,
    started_unix: u64,
    finished_unix: u64,
    horizon: usize,
    replications: usize,
    policies: Vec<&'a str>,
    failures: &'a [Failure],
    final_mean_cum_regret: Vec<(String, f64, f64)>,
    timing: &'a [TimingRow],
    accuracy: &'a [AccuracyRow],
    dataset: Option<DatasetSummary>,
    beta_star_support: Vec<usize>,
}

#[derive(Serialize)]
struct DatasetSummary {
    rows: usize,
    features: usize,
    class_sizes: (usize, usize),
    reference_nonzeros: usize,
    penalty: f64,
    noise_scale: f64,
}

fn unix(t: std::time::SystemTime) -> u64 {
    t.duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_manifest(
    cfg: &ExperimentConfig,
    report: &RunReport,
    bundle: Option<&DatasetBundle>,
    started: std::time::SystemTime,
    path: &Path,
) -> Result<()> {
    let manifest = Manifest {
        status: report.status(),
        started_unix: unix(started),
        finished_unix: unix(std::time::SystemTime::now()),
        horizon: cfg.horizon,
        replications: cfg.replications,
        policies: cfg.policies.iter().map(PolicyConfig::name).collect(),
        failures: &report.failures,
        final_mean_cum_regret: report
            .summary
            .series
            .iter()
            .filter_map(|s| s.final_row().map(|r| (s.policy.clone(), r.mean, r.half_width)))
            .collect(),
        timing: &report.timing,
        accuracy: &report.accuracy,
        dataset: bundle.map(|b| DatasetSummary {
            rows: b.num_rows(),
            features: b.num_features(),
            class_sizes: (b.class0.len(), b.class1.len()),
            reference_nonzeros: b.nonzeros(),
            penalty: b.penalty,
            noise_scale: b.noise_scale,
        }),
        beta_star_support: report.beta_star.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
