//! Design diagnostics on a simulated exploration design.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use vbts::diagnostics::{
    compatibility, gram_matrix, margin_exponent, sparse_eigen, transfer_bound_check, CompatibilityMethod, EigenMode,
    Matrix,
};
use vbts::env::EnvSpec;
use vbts::{seeded_rng, ColumnDesign};

use crate::config::SyntheticEnv;
use crate::error::{HarnessError, Result};
use crate::seeds::stable_hash;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dir")]
    pub output_dir: PathBuf,
    /// Rows of the simulated design; each is the context of a uniformly
    /// chosen arm.
    pub rows: usize,
    pub env: SyntheticEnv,
    #[serde(default)]
    pub sparse_eigen: EigenBlock,
    #[serde(default)]
    pub compatibility: CompatBlock,
    #[serde(default)]
    pub margin: MarginBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transfer: Option<TransferBlock>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("diagnostics")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EigenBlock {
    /// Support size; defaults to the sparsity of the true parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<EigenMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatBlock {
    pub alpha: f64,
    pub method: CompatibilityMethod,
}

impl Default for CompatBlock {
    fn default() -> Self {
        CompatBlock { alpha: 7.0, method: CompatibilityMethod::ProjectedDescent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginBlock {
    pub h_grid: Vec<f64>,
    pub samples: usize,
}

impl Default for MarginBlock {
    fn default() -> Self {
        MarginBlock { h_grid: vec![0.01, 0.02, 0.05, 0.1, 0.2], samples: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferBlock {
    pub m: usize,
    pub eta: f64,
    #[serde(default = "default_transfer_samples")]
    pub samples: usize,
}

fn default_transfer_samples() -> usize {
    10_000
}

impl DiagnoseConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DiagnoseConfig = toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        if cfg.rows == 0 {
            return Err(HarnessError::config("rows must be at least 1"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<T> Outcome<T> {
    fn from(r: vbts::Result<T>) -> Self {
        match r {
            Ok(v) => Outcome { value: Some(v), error: None },
            Err(e) => Outcome { value: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenOut {
    pub s: usize,
    pub phi_min: f64,
    pub phi_max: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatOut {
    pub value: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginOut {
    /// `null` stands for the infinite-exponent case.
    pub omega: Option<f64>,
    pub curve: Vec<(f64, f64, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransferOut {
    pub hypothesis_holds: bool,
    pub sparse_min_eigen: f64,
    pub min_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub rows: usize,
    pub dim: usize,
    pub support: Vec<usize>,
    pub sparse_eigen: Outcome<EigenOut>,
    pub compatibility: Outcome<CompatOut>,
    pub margin: Outcome<MarginOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transfer: Option<Outcome<TransferOut>>,
}

impl DiagnoseReport {
    pub fn any_failed(&self) -> bool {
        self.sparse_eigen.error.is_some()
            || self.compatibility.error.is_some()
            || self.margin.error.is_some()
            || self.transfer.as_ref().is_some_and(|t| t.error.is_some())
    }
}

fn population_gram(env: &EnvSpec) -> Option<Matrix<f64>> {
    let cov = env.context_covariance()?;
    let d = cov.len();
    Some(Matrix::from_fn(d, d, |i, j| cov[i][j]))
}

pub fn run_diagnose(cfg: &DiagnoseConfig) -> Result<DiagnoseReport> {
    let s = &cfg.env;
    let beta_seed = s.beta_seed.unwrap_or_else(|| stable_hash(cfg.seed, "\u{0}beta", 0));
    let beta = vbts::env::generate_beta(s.dim, s.sparsity, s.beta_scheme, &mut seeded_rng(beta_seed))?;
    let mut env = EnvSpec::new(s.num_arms, s.contexts.to_dist(), beta, s.noise_sigma)?.with_noise_law(s.noise_law);
    if let Some(x_max) = s.clip_x_max {
        env = env.with_clip(x_max)?;
    }
    let support: Vec<usize> = env.beta_star.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j).collect();

    let mut rng = seeded_rng(stable_hash(cfg.seed, "\u{0}design", 0));
    let mut design = ColumnDesign::new(s.dim);
    for t in 1..=cfg.rows {
        let ctx = env.sample_contexts(&mut rng, t)?;
        let arm = rng.random_range(0..ctx.num_arms());
        design.push_row(&ctx.vectors[arm])?;
    }
    let gram = gram_matrix(&design);

    let eigen_s = cfg.sparse_eigen.s.unwrap_or(s.sparsity);
    let eigen = match cfg.sparse_eigen.mode {
        Some(mode) => sparse_eigen(&gram, eigen_s, mode),
        // Fall back to the heuristic when enumeration is over budget.
        None => match sparse_eigen(&gram, eigen_s, EigenMode::Exact) {
            Err(vbts::Error::Budget { .. }) => sparse_eigen(&gram, eigen_s, EigenMode::Greedy),
            other => other,
        },
    }
    .map(|r| EigenOut { s: eigen_s, phi_min: r.phi_min, phi_max: r.phi_max, certified: r.certified });

    let compat = compatibility(&gram, &support, cfg.compatibility.alpha, cfg.compatibility.method, cfg.seed)
        .map(|c| CompatOut { value: c.value, certified: c.certified });

    let margin = margin_exponent(&env, &cfg.margin.h_grid, cfg.margin.samples, stable_hash(cfg.seed, "\u{0}margin", 0))
        .map(|m| MarginOut {
            omega: m.omega.is_finite().then_some(m.omega),
            curve: m.curve.iter().map(|p| (p.h, p.prob, p.events)).collect(),
        });

    let transfer = cfg.transfer.as_ref().map(|tb| {
        let reference =
            population_gram(&env).ok_or_else(|| vbts::Error::Input("context law has no closed-form covariance".into()));
        Outcome::from(reference.and_then(|m_ref| {
            let diff = &gram - &m_ref * (1.0 - tb.eta);
            let diag: Vec<f64> = (0..s.dim).map(|j| diff[(j, j)].max(0.0)).collect();
            transfer_bound_check(&gram, &m_ref, tb.m, tb.eta, &diag, tb.samples, cfg.seed).map(|r| TransferOut {
                hypothesis_holds: r.hypothesis_holds,
                sparse_min_eigen: r.sparse_min_eigen,
                min_slack: r.min_slack,
            })
        }))
    });

    Ok(DiagnoseReport {
        rows: cfg.rows,
        dim: s.dim,
        support,
        sparse_eigen: Outcome::from(eigen),
        compatibility: Outcome::from(compat),
        margin: Outcome::from(margin),
        transfer,
    })
}

pub fn write_report(report: &DiagnoseReport, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join("diagnostics.json");
    let text = serde_json::to_string_pretty(report).expect("report serialises");
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(path)
}
