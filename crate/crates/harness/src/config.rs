//! Experiment configuration, read from TOML. Unknown keys are rejected.
//!
//! ```toml
//! horizon = 400
//! replications = 20
//! base_seed = 1
//! output_dir = "ec-d100"
//!
//! [env]
//! kind = "synthetic"
//! num_arms = 5
//! dim = 100
//! sparsity = 3
//! noise_sigma = 0.5
//! contexts = { type = "equi_correlated", rho = 0.3 }
//!
//! [[policies]]
//! kind = "vbts"
//! sigma = 0.5
//!
//! [[policies]]
//! kind = "lints"
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vbts::env::{BetaScheme, ContextDist, NoiseLaw};
use vbts::policies::{EstcConfig, LassoL1Config, LinTsConfig, LinUcbConfig, VbtsConfig};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizon: usize,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Cadence at which policy estimates are logged for contraction traces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_every: Option<usize>,
    /// Output directory, relative to the output root unless absolute.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Number of worker threads running (policy, replication) cells.
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Write measured per-round wall-clock times into the trace CSVs.
    /// Off by default so traces are byte-for-byte reproducible.
    #[serde(default)]
    pub record_micros: bool,
    pub env: EnvConfig,
    pub policies: Vec<PolicyConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("experiment")
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Synthetic(SyntheticEnv),
    Dataset(DatasetEnv),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEnv {
    pub num_arms: usize,
    pub dim: usize,
    pub sparsity: usize,
    #[serde(default = "default_scheme")]
    pub beta_scheme: BetaScheme,
    /// Seed for drawing the true parameter; derived from `base_seed` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_seed: Option<u64>,
    pub noise_sigma: f64,
    #[serde(default)]
    pub noise_law: NoiseLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_x_max: Option<f64>,
    pub contexts: ContextsConfig,
}

fn default_scheme() -> BetaScheme {
    BetaScheme::Setup1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContextsConfig {
    EquiCorrelated { rho: f64 },
    AutoRegressive { phi: f64 },
    TruncatedGaussian { x_max: f64 },
}

impl ContextsConfig {
    pub fn to_dist(self) -> ContextDist {
        match self {
            ContextsConfig::EquiCorrelated { rho } => ContextDist::EquiCorrelated { rho },
            ContextsConfig::AutoRegressive { phi } => ContextDist::AutoRegressive { phi },
            ContextsConfig::TruncatedGaussian { x_max } => ContextDist::TruncatedGaussian { x_max },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEnv {
    pub source: DataSource,
    /// Reward noise level; the fitted noise scale is used if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default = "default_folds")]
    pub cv_folds: usize,
}

fn default_folds() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "from", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// A delimited file; relative paths resolve against the config file.
    Csv {
        path: PathBuf,
        label_col: String,
        #[serde(default)]
        log2: bool,
    },
    /// The built-in synthetic stand-in for the breast-cancer expression data.
    Mimic {
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyConfig {
    Vbts(VbtsConfig),
    Lints(LinTsConfig),
    Linucb(LinUcbConfig),
    Estc(EstcConfig),
    LassoL1(LassoL1Config),
    Uniform,
    Oracle,
}

impl PolicyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyConfig::Vbts(_) => "vbts",
            PolicyConfig::Lints(_) => "lints",
            PolicyConfig::Linucb(_) => "linucb",
            PolicyConfig::Estc(_) => "estc",
            PolicyConfig::LassoL1(_) => "lasso_l1",
            PolicyConfig::Uniform => "uniform",
            PolicyConfig::Oracle => "oracle",
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(HarnessError::config("horizon must be at least 1"));
        }
        if self.replications == 0 {
            return Err(HarnessError::config("replications must be at least 1"));
        }
        if self.parallelism == 0 {
            return Err(HarnessError::config("parallelism must be at least 1"));
        }
        if self.log_every == Some(0) {
            return Err(HarnessError::config("log_every must be at least 1"));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::config("at least one policy block is required"));
        }
        let mut seen = HashSet::new();
        for p in &self.policies {
            if !seen.insert(p.name()) {
                return Err(HarnessError::config(format!("policy '{}' is listed twice", p.name())));
            }
        }
        match &self.env {
            EnvConfig::Synthetic(s) => {
                if s.sparsity == 0 || s.sparsity > s.dim {
                    return Err(HarnessError::config("sparsity must lie in 1..=dim"));
                }
            }
            EnvConfig::Dataset(d) => {
                if d.cv_folds < 2 {
                    return Err(HarnessError::config("cv_folds must be at least 2"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
horizon = 50
replications = 3
base_seed = 9
log_every = 10

[env]
kind = "synthetic"
num_arms = 4
dim = 12
sparsity = 2
noise_sigma = 0.5
contexts = { type = "auto_regressive", phi = 0.5 }

[[policies]]
kind = "vbts"
sigma = 0.5
lambda = { mode = "practical_sqrt", lambda_star = 0.3 }

[[policies]]
kind = "lints"
scale = 0.5

[[policies]]
kind = "uniform"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.policies.len(), 3);
        assert_eq!(cfg.parallelism, 1);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let bad = SAMPLE.replace("scale = 0.5", "scael = 0.5");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(HarnessError::Config(_))));
        let bad = SAMPLE.replace("horizon = 50", "horizon = 50\nhorizn = 3");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = SAMPLE.replace("dim = 12", "dim = 12\ndimm = 3");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = SAMPLE.replace("kind = \"uniform\"", "kind = \"drlasso\"");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn invalid_values_are_errors() {
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("replications = 3", "replications = 0")).is_err());
        assert!(ExperimentConfig::from_toml(&SAMPLE.replace("horizon = 50", "horizon = 0")).is_err());
        let dup = format!("{SAMPLE}\n[[policies]]\nkind = \"uniform\"\n");
        assert!(ExperimentConfig::from_toml(&dup).is_err());
    }
}
