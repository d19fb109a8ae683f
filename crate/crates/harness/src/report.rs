//! Trace files and the statistics aggregated from them.

use std::path::Path;

use vbts::policies::RegretTrace;

use crate::error::{HarnessError, Result};

pub const TRACE_HEADER: [&str; 8] = ["policy", "rep", "t", "regret", "cum_regret", "micros", "arm", "flags"];

/// z quantile of the normal-approximation 95% band.
pub const BAND_Z: f64 = 1.96;

/// Shortest decimal form with 17 significant digits, so values read back
/// bit-exactly.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// One trace as CSV. Arms are 0-based. The `micros` column is written as 0
/// unless `with_micros` is set.
pub fn write_trace_csv(trace: &RegretTrace, path: &Path, with_micros: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in &trace.rounds {
        let micros = if with_micros { r.micros } else { 0 };
        w.write_record([
            trace.policy.clone(),
            trace.replication.to_string(),
            r.t.to_string(),
            fmt17(r.regret),
            fmt17(r.cum_regret),
            micros.to_string(),
            r.arm.to_string(),
            r.flags.to_string(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub policy: String,
    pub rep: usize,
    pub t: usize,
    pub regret: f64,
    pub cum_regret: f64,
    pub micros: u64,
    pub arm: usize,
    pub flags: String,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let r = record?;
        let num = |i: usize| -> Result<f64> {
            r[i].parse().map_err(|_| HarnessError::data(format!("{}: bad number '{}'", path.display(), &r[i])))
        };
        let int = |i: usize| -> Result<usize> {
            r[i].parse().map_err(|_| HarnessError::data(format!("{}: bad integer '{}'", path.display(), &r[i])))
        };
        out.push(TraceRow {
            policy: r[0].to_string(),
            rep: int(1)?,
            t: int(2)?,
            regret: num(3)?,
            cum_regret: num(4)?,
            micros: int(5)? as u64,
            arm: int(6)?,
            flags: r[7].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub mean: f64,
    pub sd: f64,
    pub half_width: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummarySeries {
    pub policy: String,
    pub rows: Vec<SummaryRow>,
}

impl SummarySeries {
    pub fn final_row(&self) -> Option<&SummaryRow> {
        self.rows.last()
    }

    pub fn at(&self, t: usize) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.t == t)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub series: Vec<SummarySeries>,
}

impl Summary {
    pub fn policy(&self, name: &str) -> Option<&SummarySeries> {
        self.series.iter().find(|s| s.policy == name)
    }
}

/// Mean and standard deviation (n - 1 denominator; 0 for one sample).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-round mean cumulative regret and 95% band over the replications of
/// one policy. Rounds are aggregated over the replications that reached them.
pub fn summarize_policy(policy: &str, traces: &[&RegretTrace]) -> SummarySeries {
    let horizon = traces.iter().map(|t| t.rounds.len()).max().unwrap_or(0);
    let rows = (0..horizon)
        .map(|i| {
            let values: Vec<f64> = traces.iter().filter_map(|tr| tr.rounds.get(i).map(|r| r.cum_regret)).collect();
            let (mean, sd) = mean_sd(&values);
            SummaryRow {
                t: i + 1,
                mean,
                sd,
                half_width: BAND_Z * sd / (values.len() as f64).sqrt(),
                replications: values.len(),
            }
        })
        .collect();
    SummarySeries { policy: policy.to_string(), rows }
}

pub const SUMMARY_HEADER: [&str; 8] =
    ["policy", "t", "mean_cum_regret", "sd_cum_regret", "half_width", "lower", "upper", "replications"];

pub fn write_summary_csv(summary: &Summary, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for s in &summary.series {
        for r in &s.rows {
            w.write_record([
                s.policy.clone(),
                r.t.to_string(),
                fmt17(r.mean),
                fmt17(r.sd),
                fmt17(r.half_width),
                fmt17(r.mean - r.half_width),
                fmt17(r.mean + r.half_width),
                r.replications.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Summary> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut summary = Summary::default();
    for record in reader.records() {
        let r = record?;
        if r.len() < 8 {
            return Err(HarnessError::data(format!("{}: expected 8 columns", path.display())));
        }
        let bad = |i: usize| HarnessError::data(format!("{}: bad value '{}'", path.display(), &r[i]));
        let row = SummaryRow {
            t: r[1].parse().map_err(|_| bad(1))?,
            mean: r[2].parse().map_err(|_| bad(2))?,
            sd: r[3].parse().map_err(|_| bad(3))?,
            half_width: r[4].parse().map_err(|_| bad(4))?,
            replications: r[7].parse().map_err(|_| bad(7))?,
        };
        match summary.series.last_mut() {
            Some(s) if s.policy == r[0] => s.rows.push(row),
            _ => summary.series.push(SummarySeries { policy: r[0].to_string(), rows: vec![row] }),
        }
    }
    if summary.series.is_empty() {
        return Err(HarnessError::data(format!("{}: summary is empty", path.display())));
    }
    Ok(summary)
}
