use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vbts_harness::config::ExperimentConfig;
use vbts_harness::diagnose::{run_diagnose, write_report, DiagnoseConfig};
use vbts_harness::experiment::{output_root, run_experiment, RunStatus, OUTPUT_ROOT_VAR};
use vbts_harness::ingest::{generate_mimic, ingest_dataset, write_labelled_csv, Transform};
use vbts_harness::plot::emit_plot;
use vbts_harness::report::read_summary_csv;
use vbts_harness::sweep::run_sweep;
use vbts_harness::{HarnessError, Result};

/// Sparse contextual bandit experiments.
///
/// Results go under the directory named by VBTS_OUTPUT_ROOT (default
/// `results`). Exit codes: 0 success, 1 partial failure, 2 config error.
#[derive(Parser)]
#[command(name = "vbts", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy and replication of an experiment config.
    Run {
        config: PathBuf,
        /// Override the config's worker count.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Read a labelled CSV and fit the reference logistic model.
    Ingest {
        csv: PathBuf,
        #[arg(long)]
        label_col: String,
        /// Apply log2(1 + x) to every feature.
        #[arg(long)]
        log2: bool,
        #[arg(long, default_value_t = 5)]
        folds: usize,
    },
    /// Sparse eigenvalues, compatibility, margin and transfer checks on a
    /// simulated design.
    Diagnose { config: PathBuf },
    /// Render a summary CSV as an SVG regret plot.
    Plot {
        summary: PathBuf,
        /// Output path; defaults to the summary path with an .svg extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun an experiment once per value of one config parameter.
    Sweep {
        config: PathBuf,
        /// Dotted path such as `policies.0.scale`, or `lambda_star`.
        #[arg(long)]
        param: String,
        /// Comma-separated values; optional for `lambda_star`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Write the synthetic 168 x 2905 expression stand-in as CSV.
    Mimic {
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
}

fn report_status(status: RunStatus, failures: usize) -> i32 {
    if failures > 0 {
        eprintln!("{failures} replication(s) failed; see manifest.json");
    }
    status.exit_code()
}

fn execute(cli: Cli) -> Result<i32> {
    let root = output_root();
    match cli.command {
        Command::Run { config, parallelism } => {
            let mut cfg = ExperimentConfig::from_toml(&read(&config)?)?;
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            let report = run_experiment(&cfg, &config_dir(&config), &root)?;
            for s in &report.summary.series {
                if let Some(r) = s.final_row() {
                    println!("{:<10} R(T) = {:.4} +/- {:.4}", s.policy, r.mean, r.half_width);
                }
            }
            for a in &report.accuracy {
                println!("{:<10} accuracy = {:.4}", a.policy, a.mean);
            }
            println!("wrote {}", report.output_dir.display());
            Ok(report_status(report.status(), report.failures.len()))
        }
        Command::Ingest { csv, label_col, log2, folds } => {
            let transform = if log2 { Transform::Log2 } else { Transform::None };
            let bundle = ingest_dataset(&csv, &label_col, transform, folds)?;
            let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into());
            let dir = root.join("ingest").join(stem);
            std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
            let path = dir.join("bundle.json");
            std::fs::write(&path, serde_json::to_string_pretty(&bundle).expect("bundle serialises"))
                .map_err(|e| HarnessError::io(&path, e))?;
            println!(
                "{} rows x {} features, classes {}/{}, {} nonzero reference coefficients, noise scale {:.4}",
                bundle.num_rows(),
                bundle.num_features(),
                bundle.class0.len(),
                bundle.class1.len(),
                bundle.nonzeros(),
                bundle.noise_scale
            );
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::Diagnose { config } => {
            let cfg = DiagnoseConfig::from_toml(&read(&config)?)?;
            let report = run_diagnose(&cfg)?;
            let dir = if cfg.output_dir.is_absolute() { cfg.output_dir.clone() } else { root.join(&cfg.output_dir) };
            let path = write_report(&report, &dir)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            println!("wrote {}", path.display());
            Ok(if report.any_failed() { 1 } else { 0 })
        }
        Command::Plot { summary, out } => {
            let s = read_summary_csv(&summary)?;
            let out = out.unwrap_or_else(|| summary.with_extension("svg"));
            emit_plot(&s, &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Sweep { config, param, values } => {
            let reports = run_sweep(&read(&config)?, &param, &values, &config_dir(&config), &root)?;
            let mut code = 0;
            for (value, report) in &reports {
                for s in &report.summary.series {
                    if let Some(r) = s.final_row() {
                        println!("{param}={value:<8} {:<10} R(T) = {:.4} +/- {:.4}", s.policy, r.mean, r.half_width);
                    }
                }
                code = code.max(report.status().exit_code());
            }
            Ok(code)
        }
        Command::Mimic { out, seed } => {
            let mimic = generate_mimic(seed);
            write_labelled_csv(&mimic.table, &out)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            if e.exit_code() == 2 {
                eprintln!("(output root is taken from {OUTPUT_ROOT_VAR})");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
