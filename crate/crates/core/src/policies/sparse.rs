use serde::{Deserialize, Serialize};

use super::{History, Policy, RoundFlags, Selection};
use crate::env::ContextSet;
use crate::linalg::{argmax, dot};
use crate::sparse_linear::{default_lasso_penalty, lasso_fit_warm, RegressionProblem};
use crate::{Result, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoL1Config {
    /// Sparsity level `s*` in the confidence radius.
    pub sparsity: usize,
    /// Constant `c` in `c s* sqrt((log d + log t) / t)`.
    pub radius_const: f64,
    pub sigma: f64,
    pub x_max: f64,
    pub first_round_uniform: bool,
}

impl Default for LassoL1Config {
    fn default() -> Self {
        LassoL1Config { sparsity: 1, radius_const: 1.0, sigma: 1.0, x_max: 1.0, first_round_uniform: true }
    }
}

/// Optimism over an l1 ball centred at the lasso estimate.
///
/// The maximum of `<x, beta>` over `||beta - beta_hat||_1 <= r` is
/// `<x, beta_hat> + r ||x||_inf`, attained at a signed vertex of the ball.
#[derive(Debug, Clone)]
pub struct LassoL1 {
    config: LassoL1Config,
    history: History,
    estimate: Vec<f64>,
}

impl LassoL1 {
    pub fn new(config: LassoL1Config, dim: usize) -> Self {
        LassoL1 { config, history: History::new(dim), estimate: vec![0.0; dim] }
    }

    pub fn radius(&self, t: usize) -> f64 {
        let d = self.history.design().dim() as f64;
        let t = t.max(1) as f64;
        self.config.radius_const * self.config.sparsity as f64 * ((d.ln() + t.ln()) / t).sqrt()
    }

    /// Optimistic score of each arm for a given centre and radius.
    pub fn scores(ctx: &ContextSet, centre: &[f64], radius: f64) -> Vec<f64> {
        ctx.vectors.iter().map(|x| dot(x, centre) + radius * x.iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect()
    }

    pub fn current_estimate(&self) -> &[f64] {
        &self.estimate
    }

    fn refit(&mut self) -> Result<bool> {
        let design = self.history.design();
        if design.rows() == 0 {
            return Ok(true);
        }
        let penalty = default_lasso_penalty(self.config.sigma, self.config.x_max, design.dim(), design.rows());
        let problem = RegressionProblem::new(design, self.history.rewards(), penalty)?;
        let sol = lasso_fit_warm(&problem, 1e-6, 1000, &self.estimate)?;
        self.estimate = sol.coefficients;
        Ok(sol.converged)
    }
}

impl Policy for LassoL1 {
    fn name(&self) -> &str {
        "lasso_l1"
    }

    fn select(&mut self, ctx: &ContextSet, rng: &mut SimRng) -> Result<Selection> {
        let t = self.history.next_round();
        if self.config.first_round_uniform && t <= 1 {
            return Ok(Selection::uniform(ctx.num_arms(), rng));
        }
        let mut flags = RoundFlags::NONE;
        if !self.refit()? {
            flags.insert(RoundFlags::LASSO_NONCONVERGED);
        }
        let arm = argmax(Self::scores(ctx, &self.estimate, self.radius(t)));
        Ok(Selection { arm, flags })
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.estimate.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn zero_radius_is_greedy_lasso() {
        let ctx = ContextSet { round: 3, vectors: vec![vec![1.0, 5.0], vec![2.0, -9.0]], labels: None };
        let s = LassoL1::scores(&ctx, &[1.0, 0.0], 0.0);
        assert_eq!(argmax(s), 1);
    }

    #[test]
    fn zero_centre_picks_largest_sup_norm() {
        let ctx = ContextSet {
            round: 3,
            vectors: vec![vec![1.0, 1.0, 1.0], vec![-3.0, 0.0, 0.0], vec![2.0, 2.0, 2.0]],
            labels: None,
        };
        assert_eq!(argmax(LassoL1::scores(&ctx, &[0.0; 3], 1.0)), 1);
    }

    #[test]
    fn optimistic_score_dominates_ball_samples_and_is_attained() {
        let mut rng = seeded_rng(1);
        let d = 6;
        let centre: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let radius = 0.7;
        let ctx = ContextSet {
            round: 1,
            vectors: (0..4).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect(),
            labels: None,
        };
        let scores = LassoL1::scores(&ctx, &centre, radius);
        for (x, &score) in ctx.vectors.iter().zip(&scores) {
            let mut best_sample = f64::NEG_INFINITY;
            for _ in 0..100_000 {
                // Uniform direction on the l1 sphere scaled into the ball.
                let e: Vec<f64> = (0..d).map(|_| -rng.random::<f64>().ln()).collect();
                let total: f64 = e.iter().sum();
                let scale = radius * rng.random::<f64>().powf(1.0 / d as f64);
                let point: Vec<f64> = e
                    .iter()
                    .zip(&centre)
                    .map(|(ei, c)| c + if rng.random::<bool>() { 1.0 } else { -1.0 } * ei / total * scale)
                    .collect();
                best_sample = best_sample.max(dot(x, &point));
            }
            assert!(score >= best_sample - 1e-6);
            let vertex_best = (0..d)
                .flat_map(|j| {
                    [1.0, -1.0].map(|sgn| {
                        let mut p = centre.clone();
                        p[j] += sgn * radius;
                        dot(x, &p)
                    })
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((vertex_best - score).abs() < 1e-12);
        }
    }
}
