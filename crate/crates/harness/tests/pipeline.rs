use std::path::Path;
use std::process::Command;

use vbts_harness::config::ExperimentConfig;
use vbts_harness::experiment::{run_experiment, RunStatus, OUTPUT_ROOT_VAR};
use vbts_harness::plot::render_svg;
use vbts_harness::report::{read_summary_csv, read_trace_csv, Summary, SummaryRow, SummarySeries};
use vbts_harness::sweep::run_sweep;

fn small_config(horizon: usize, replications: usize, policies: &[&str]) -> String {
    let mut text = format!(
        r#"
horizon = {horizon}
replications = {replications}
base_seed = 11
output_dir = "small"

[env]
kind = "synthetic"
num_arms = 3
dim = 10
sparsity = 2
noise_sigma = 0.5
contexts = {{ type = "equi_correlated", rho = 0.2 }}
"#
    );
    for p in policies {
        text.push_str(&format!("\n[[policies]]\nkind = \"{p}\"\n"));
    }
    text
}

fn run(text: &str, root: &Path) -> vbts_harness::experiment::RunReport {
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    run_experiment(&cfg, Path::new("."), root).unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn oracle_has_zero_regret() {
    let root = tempfile::tempdir().unwrap();
    let report = run(&small_config(50, 1, &["oracle"]), root.path());
    assert_eq!(report.status(), RunStatus::Success);
    let rows = read_trace_csv(&report.output_dir.join("traces/oracle_rep000.csv")).unwrap();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r.regret == 0.0 && r.cum_regret == 0.0));
}

#[test]
fn traces_are_byte_identical_across_runs() {
    let text = small_config(40, 2, &["vbts", "lints", "uniform"]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&text, a.path());
    let rb = run(&text, b.path());
    let fa = read_dir_sorted(&ra.output_dir.join("traces"));
    let fb = read_dir_sorted(&rb.output_dir.join("traces"));
    assert_eq!(fa.len(), 6);
    assert_eq!(fa, fb);
    assert_eq!(
        std::fs::read(ra.output_dir.join("summary.csv")).unwrap(),
        std::fs::read(rb.output_dir.join("summary.csv")).unwrap()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let serial = small_config(30, 4, &["vbts", "linucb", "estc", "lasso_l1"]);
    let parallel = serial.replace("output_dir = \"small\"", "output_dir = \"small\"\nparallelism = 8");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(&serial, a.path());
    let rb = run(&parallel, b.path());
    assert_eq!(read_dir_sorted(&ra.output_dir.join("traces")), read_dir_sorted(&rb.output_dir.join("traces")));
}

#[test]
fn summary_mean_matches_trace_files() {
    let root = tempfile::tempdir().unwrap();
    let report = run(&small_config(25, 4, &["uniform"]), root.path());
    let summary = read_summary_csv(&report.output_dir.join("summary.csv")).unwrap();
    let series = summary.policy("uniform").unwrap();
    let traces: Vec<_> = (0..4)
        .map(|r| read_trace_csv(&report.output_dir.join(format!("traces/uniform_rep{r:03}.csv"))).unwrap())
        .collect();
    for t in [1usize, 10, 25] {
        let values: Vec<f64> = traces.iter().map(|tr| tr[t - 1].cum_regret).collect();
        let mean = values.iter().sum::<f64>() / 4.0;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let row = series.at(t).unwrap();
        assert!((row.mean - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        assert!((row.half_width - 1.96 * sd / 2.0).abs() <= 1e-12 * (1.0 + sd));
        assert_eq!(row.replications, 4);
    }
    // Cumulative regret is the running sum of the per-round column.
    for tr in &traces {
        let mut acc = 0.0;
        for row in tr {
            acc += row.regret;
            assert!((row.cum_regret - acc).abs() <= 1e-9 * (1.0 + acc));
        }
    }
}

#[test]
fn micros_column_is_zero_unless_requested() {
    let root = tempfile::tempdir().unwrap();
    let report = run(&small_config(10, 1, &["vbts"]), root.path());
    let rows = read_trace_csv(&report.output_dir.join("traces/vbts_rep000.csv")).unwrap();
    assert!(rows.iter().all(|r| r.micros == 0));
    assert!(report.output_dir.join("timing.csv").exists());
    assert!(report.output_dir.join("manifest.json").exists());
}

fn series(policy: &str, rows: &[(f64, f64)]) -> SummarySeries {
    SummarySeries {
        policy: policy.into(),
        rows: rows
            .iter()
            .enumerate()
            .map(|(i, &(mean, half_width))| SummaryRow { t: i + 1, mean, sd: 0.0, half_width, replications: 3 })
            .collect(),
    }
}

#[test]
fn plot_has_one_band_and_line_per_policy() {
    let summary =
        Summary { series: vec![series("a", &[(1.0, 0.5), (2.0, 0.5), (3.0, 1.0)]), series("b", &[(0.0, 0.0); 3])] };
    let svg = render_svg(&summary).unwrap();
    assert_eq!(svg.matches("<g class=\"policy\"").count(), 2);
    assert_eq!(svg.matches("<polyline class=\"mean\"").count(), 2);
    assert_eq!(svg.matches("<polygon class=\"band\"").count(), 2);
    // The zero series lies on the x axis.
    let axis_y =
        svg.split("<g class=\"axes\"").nth(1).unwrap().split("y1=\"").nth(1).unwrap().split('"').next().unwrap();
    let line = svg.lines().filter(|l| l.contains("<polyline")).nth(1).unwrap();
    let points = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
    let ys: Vec<&str> = points.split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
    assert!(ys.iter().all(|y| *y == axis_y), "{ys:?} vs {axis_y}");
}

#[test]
fn band_half_width_spot_check() {
    // Three replications with cumulative regret 1, 2, 6 at some round:
    // mean 3, sample sd sqrt(7), half width 1.96 sqrt(7/3).
    let values = [1.0, 2.0, 6.0];
    let (mean, sd) = vbts_harness::report::mean_sd(&values);
    assert!((mean - 3.0).abs() < 1e-15);
    assert!((sd - 7f64.sqrt()).abs() < 1e-14);
    let hw = vbts_harness::report::BAND_Z * sd / 3f64.sqrt();
    assert!((hw - 1.96 * (7.0f64 / 3.0).sqrt()).abs() < 1e-14);
}

#[test]
fn sweep_writes_one_bundle_per_value() {
    let root = tempfile::tempdir().unwrap();
    let text = small_config(10, 1, &["vbts"]);
    let reports = run_sweep(&text, "horizon", &["5".into(), "8".into()], Path::new("."), root.path()).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(root.path().join("small/horizon=5/summary.csv").exists());
    assert!(root.path().join("small/horizon=8/summary.csv").exists());
    let sweep = std::fs::read_to_string(root.path().join("small/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 3);
    let summary = read_summary_csv(&root.path().join("small/horizon=8/summary.csv")).unwrap();
    assert_eq!(summary.series[0].rows.len(), 8);
}

fn cli(root: &Path, args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_vbts"))
        .args(args)
        .env(OUTPUT_ROOT_VAR, root)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let root = tempfile::tempdir().unwrap();
    let good = root.path().join("good.toml");
    std::fs::write(&good, small_config(5, 1, &["uniform"])).unwrap();
    assert_eq!(cli(root.path(), &["run", good.to_str().unwrap()]), 0);
    assert!(root.path().join("small/summary.csv").exists());

    let bad = root.path().join("bad.toml");
    std::fs::write(&bad, small_config(5, 1, &["uniform"]).replace("horizon", "horizn")).unwrap();
    assert_eq!(cli(root.path(), &["run", bad.to_str().unwrap()]), 2);
    assert_eq!(cli(root.path(), &["run", "/nonexistent/config.toml"]), 2);

    let summary = root.path().join("small/summary.csv");
    let out = root.path().join("plot.svg");
    assert_eq!(cli(root.path(), &["plot", summary.to_str().unwrap(), "--out", out.to_str().unwrap()]), 0);
    assert!(std::fs::read_to_string(out).unwrap().contains("<polyline"));
}
