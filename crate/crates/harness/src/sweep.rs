//! One-parameter sweeps over an experiment config.
//!
//! A parameter is addressed by a dotted path into the TOML document, with
//! numeric segments indexing arrays (`policies.0.scale`). The special name
//! `lambda_star` switches every VBTS block to the `lambda* sqrt(t)` schedule
//! and, when no values are given, sweeps the grid `{0.2, 0.3, 0.4, 0.5}`.

use std::path::Path;

use toml::Value;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiment::{run_experiment, RunReport};

pub const LAMBDA_STAR_PARAM: &str = "lambda_star";
pub const LAMBDA_STAR_GRID: [f64; 4] = [0.2, 0.3, 0.4, 0.5];

/// Parse a command-line value as a TOML literal, falling back to a string.
pub fn parse_literal(text: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Set `path` in `doc`, creating intermediate tables as needed.
pub fn set_dotted(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(HarnessError::config(format!("bad parameter path '{path}'")));
    }
    let mut node = doc;
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        node = match node {
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| HarnessError::config(format!("'{seg}' in '{path}' must index an array")))?;
                let len = items.len();
                let slot = items
                    .get_mut(i)
                    .ok_or_else(|| HarnessError::config(format!("index {i} out of range ({len}) in '{path}'")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            Value::Table(table) => {
                if last {
                    table.insert(seg.to_string(), value);
                    return Ok(());
                }
                table.entry(seg.to_string()).or_insert_with(|| Value::Table(toml::Table::new()))
            }
            _ => return Err(HarnessError::config(format!("'{path}' descends into a scalar"))),
        };
    }
    unreachable!("loop returns on the last segment")
}

/// The configs of a sweep, one per value, each writing to
/// `<output_dir>/<param>=<value>`.
pub fn sweep_configs(base_text: &str, param: &str, values: &[String]) -> Result<Vec<(String, ExperimentConfig)>> {
    let base: Value = toml::from_str(base_text).map_err(|e| HarnessError::config(e.to_string()))?;
    let base_cfg = ExperimentConfig::from_toml(base_text)?;
    let values: Vec<String> = if values.is_empty() {
        if param != LAMBDA_STAR_PARAM {
            return Err(HarnessError::config("--values is required for this parameter"));
        }
        LAMBDA_STAR_GRID.iter().map(|v| v.to_string()).collect()
    } else {
        values.to_vec()
    };
    let mut out = Vec::with_capacity(values.len());
    for raw in &values {
        let mut doc = base.clone();
        let literal = parse_literal(raw);
        if param == LAMBDA_STAR_PARAM {
            let mut hit = false;
            if let Some(Value::Array(policies)) = doc.get_mut("policies") {
                for p in policies.iter_mut() {
                    if p.get("kind").and_then(Value::as_str) == Some("vbts") {
                        let mut schedule = toml::Table::new();
                        schedule.insert("mode".into(), Value::String("practical_sqrt".into()));
                        schedule.insert("lambda_star".into(), literal.clone());
                        set_dotted(p, "lambda", Value::Table(schedule))?;
                        hit = true;
                    }
                }
            }
            if !hit {
                return Err(HarnessError::config("lambda_star sweep needs a vbts policy block"));
            }
        } else {
            set_dotted(&mut doc, param, literal)?;
        }
        let tag = format!("{param}={raw}");
        set_dotted(&mut doc, "output_dir", Value::String(base_cfg.output_dir.join(&tag).display().to_string()))?;
        let text = toml::to_string(&doc).map_err(|e| HarnessError::config(e.to_string()))?;
        out.push((raw.clone(), ExperimentConfig::from_toml(&text)?));
    }
    Ok(out)
}

/// Run a sweep and write `sweep.csv` next to the per-value bundles.
pub fn run_sweep(
    base_text: &str,
    param: &str,
    values: &[String],
    config_dir: &Path,
    root: &Path,
) -> Result<Vec<(String, RunReport)>> {
    let configs = sweep_configs(base_text, param, values)?;
    let mut reports = Vec::with_capacity(configs.len());
    for (value, cfg) in configs {
        let report = run_experiment(&cfg, config_dir, root)?;
        reports.push((value, report));
    }
    let base_cfg = ExperimentConfig::from_toml(base_text)?;
    let dir = crate::experiment::resolve_output_dir(&base_cfg, root);
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    let path = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["param", "value", "policy", "final_mean_cum_regret", "half_width", "failures"])?;
    for (value, report) in &reports {
        for s in &report.summary.series {
            if let Some(r) = s.final_row() {
                let failed = report.failures.iter().filter(|f| f.policy == s.policy).count();
                w.write_record([
                    param.to_string(),
                    value.clone(),
                    s.policy.clone(),
                    crate::report::fmt17(r.mean),
                    crate::report::fmt17(r.half_width),
                    failed.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| HarnessError::io(&path, e))?;
    Ok(reports)
}
