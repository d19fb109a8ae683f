use serde::{Deserialize, Serialize};

use super::{History, Policy, RoundFlags, Selection};
use crate::env::ContextSet;
use crate::sparse_linear::{default_lasso_penalty, lasso_fit, RegressionProblem};
use crate::{Result, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstcConfig {
    /// Number of uniform exploration rounds; defaults to `ceil(T^{2/3})`.
    pub explore_len: Option<usize>,
    /// Noise level and context bound entering the lasso penalty.
    pub sigma: f64,
    pub x_max: f64,
}

impl Default for EstcConfig {
    fn default() -> Self {
        EstcConfig { explore_len: None, sigma: 1.0, x_max: 1.0 }
    }
}

/// Explore uniformly, fit one lasso, then commit to the greedy arm.
#[derive(Debug, Clone)]
pub struct Estc {
    config: EstcConfig,
    explore_len: usize,
    horizon: usize,
    history: History,
    estimate: Option<Vec<f64>>,
    fit_converged: bool,
}

pub fn default_explore_len(horizon: usize) -> usize {
    (horizon as f64).powf(2.0 / 3.0).ceil() as usize
}

impl Estc {
    pub fn new(config: EstcConfig, dim: usize, horizon: usize) -> Self {
        let explore_len = config.explore_len.unwrap_or_else(|| default_explore_len(horizon));
        Estc { config, explore_len, horizon, history: History::new(dim), estimate: None, fit_converged: true }
    }

    pub fn explore_len(&self) -> usize {
        self.explore_len
    }

    /// True when the exploration phase covers the whole horizon.
    pub fn never_commits(&self) -> bool {
        self.explore_len >= self.horizon
    }

    pub fn committed_estimate(&self) -> Option<&[f64]> {
        self.estimate.as_deref()
    }

    fn commit(&mut self) -> Result<()> {
        let design = self.history.design();
        let beta = if design.rows() == 0 {
            vec![0.0; design.dim()]
        } else {
            let penalty = default_lasso_penalty(self.config.sigma, self.config.x_max, design.dim(), design.rows());
            let problem = RegressionProblem::new(design, self.history.rewards(), penalty)?;
            let sol = lasso_fit(&problem, 1e-8, 10_000)?;
            self.fit_converged = sol.converged;
            sol.coefficients
        };
        self.estimate = Some(beta);
        Ok(())
    }
}

impl Policy for Estc {
    fn name(&self) -> &str {
        "estc"
    }

    fn select(&mut self, ctx: &ContextSet, rng: &mut SimRng) -> Result<Selection> {
        let t = self.history.next_round();
        if t <= self.explore_len {
            return Ok(Selection::uniform(ctx.num_arms(), rng));
        }
        let mut flags = RoundFlags::NONE;
        if self.estimate.is_none() {
            self.commit()?;
            if !self.fit_converged {
                flags.insert(RoundFlags::LASSO_NONCONVERGED);
            }
        }
        let beta = self.estimate.as_ref().expect("committed above");
        Ok(Selection { arm: ctx.greedy_arm(beta), flags })
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        self.estimate.clone()
    }
}
