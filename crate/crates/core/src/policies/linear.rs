use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{History, Policy, Selection};
use crate::env::ContextSet;
use crate::linalg::argmax;
use crate::{Result, SimRng};

/// Ridge statistics `B = I + sum x x^T`, `b = sum r x`, kept as a Cholesky
/// factor of `B` updated in `O(d^2)` per observation.
#[derive(Clone)]
pub struct RidgeStats {
    chol: Cholesky<f64, Dyn>,
    moment: DVector<f64>,
}

impl std::fmt::Debug for RidgeStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RidgeStats").field("dim", &self.moment.len()).finish()
    }
}

impl RidgeStats {
    pub fn new(dim: usize) -> Self {
        let chol = Cholesky::new(DMatrix::identity(dim, dim)).expect("identity is positive definite");
        RidgeStats { chol, moment: DVector::zeros(dim) }
    }

    pub fn update(&mut self, x: &[f64], reward: f64) {
        let v = DVector::from_column_slice(x);
        self.chol.rank_one_update(&v, 1.0);
        self.moment.axpy(reward, &v, 1.0);
    }

    /// Ridge estimate `B^{-1} b`.
    pub fn mean(&self) -> DVector<f64> {
        self.chol.solve(&self.moment)
    }

    /// Lower-triangular `L` with `B = L L^T`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let l = self.chol.l();
        &l * l.transpose()
    }

    /// `x^T B^{-1} x`
    pub fn quad_inverse(&self, x: &[f64]) -> f64 {
        let mut v = DVector::from_column_slice(x);
        self.chol.l_dirty().solve_lower_triangular_mut(&mut v);
        v.norm_squared()
    }

    /// `mean + scale * L^{-T} z`, a draw from `N(mean, scale^2 B^{-1})` when `z` is standard normal.
    pub fn transform(&self, z: &[f64], scale: f64) -> DVector<f64> {
        let mut v = DVector::from_column_slice(z);
        let l = self.chol.l();
        l.tr_solve_lower_triangular_mut(&mut v);
        self.mean() + v * scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinTsConfig {
    /// Posterior scale `v`.
    pub scale: f64,
    pub first_round_uniform: bool,
}

impl Default for LinTsConfig {
    fn default() -> Self {
        LinTsConfig { scale: 1.0, first_round_uniform: true }
    }
}

/// Linear Thompson sampling with a Gaussian ridge posterior.
#[derive(Debug, Clone)]
pub struct LinTs {
    config: LinTsConfig,
    stats: RidgeStats,
    history: History,
    last_draw: Option<(Vec<f64>, Vec<f64>)>,
}

impl LinTs {
    pub fn new(config: LinTsConfig, dim: usize) -> Self {
        LinTs { config, stats: RidgeStats::new(dim), history: History::new(dim), last_draw: None }
    }

    pub fn stats(&self) -> &RidgeStats {
        &self.stats
    }

    /// Draw `beta ~ N(mean, v^2 B^{-1})`; the standard-normal input and the
    /// draw are kept for inspection.
    pub fn sample_parameter(&mut self, rng: &mut SimRng) -> Vec<f64> {
        let d = self.history.design().dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let beta: Vec<f64> = if self.config.scale == 0.0 {
            self.stats.mean().iter().copied().collect()
        } else {
            self.stats.transform(&z, self.config.scale).iter().copied().collect()
        };
        self.last_draw = Some((z, beta.clone()));
        beta
    }

    /// `(z, beta)` of the last draw.
    pub fn last_draw(&self) -> Option<(&[f64], &[f64])> {
        self.last_draw.as_ref().map(|(z, b)| (z.as_slice(), b.as_slice()))
    }
}

impl Policy for LinTs {
    fn name(&self) -> &str {
        "lints"
    }

    fn select(&mut self, ctx: &ContextSet, rng: &mut SimRng) -> Result<Selection> {
        if self.config.first_round_uniform && self.history.is_empty() {
            return Ok(Selection::uniform(ctx.num_arms(), rng));
        }
        let beta = self.sample_parameter(rng);
        Ok(Selection::greedy(ctx.greedy_arm(&beta)))
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)?;
        self.stats.update(x, reward);
        Ok(())
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.stats.mean().iter().copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinUcbConfig {
    /// Confidence radius `alpha`.
    pub alpha: f64,
    pub first_round_uniform: bool,
}

impl Default for LinUcbConfig {
    fn default() -> Self {
        LinUcbConfig { alpha: 1.0, first_round_uniform: true }
    }
}

/// Optimism with ellipsoidal confidence sets around the ridge estimate.
#[derive(Debug, Clone)]
pub struct LinUcb {
    config: LinUcbConfig,
    stats: RidgeStats,
    history: History,
}

impl LinUcb {
    pub fn new(config: LinUcbConfig, dim: usize) -> Self {
        LinUcb { config, stats: RidgeStats::new(dim), history: History::new(dim) }
    }

    /// `<x_i, beta_hat> + alpha sqrt(x_i^T B^{-1} x_i)` for every arm.
    pub fn scores(&self, ctx: &ContextSet) -> Vec<f64> {
        let mean = self.stats.mean();
        ctx.vectors
            .iter()
            .map(|x| {
                let fit: f64 = x.iter().zip(mean.iter()).map(|(a, b)| a * b).sum();
                fit + self.config.alpha * self.stats.quad_inverse(x).sqrt()
            })
            .collect()
    }

    pub fn stats(&self) -> &RidgeStats {
        &self.stats
    }
}

impl Policy for LinUcb {
    fn name(&self) -> &str {
        "linucb"
    }

    fn select(&mut self, ctx: &ContextSet, rng: &mut SimRng) -> Result<Selection> {
        if self.config.first_round_uniform && self.history.is_empty() {
            return Ok(Selection::uniform(ctx.num_arms(), rng));
        }
        Ok(Selection::greedy(argmax(self.scores(ctx))))
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)?;
        self.stats.update(x, reward);
        Ok(())
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.stats.mean().iter().copied().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn ctx(vectors: Vec<Vec<f64>>) -> ContextSet {
        ContextSet { round: 1, vectors, labels: None }
    }

    fn random_vec(d: usize, rng: &mut SimRng) -> Vec<f64> {
        (0..d).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn ridge_stats_match_direct_solve() {
        let mut rng = seeded_rng(1);
        let mut stats = RidgeStats::new(4);
        let mut gram = DMatrix::<f64>::identity(4, 4);
        let mut moment = DVector::<f64>::zeros(4);
        for _ in 0..20 {
            let x = random_vec(4, &mut rng);
            let r: f64 = rng.sample(StandardNormal);
            stats.update(&x, r);
            let v = DVector::from_column_slice(&x);
            gram += &v * v.transpose();
            moment += v * r;
        }
        let direct = gram.clone().lu().solve(&moment).unwrap();
        assert!((stats.mean() - direct).norm() < 1e-10);
        assert!((stats.gram() - gram).norm() < 1e-9);
    }

    #[test]
    fn zero_scale_lints_is_greedy_ridge() {
        let mut rng = seeded_rng(2);
        let mut pol = LinTs::new(LinTsConfig { scale: 0.0, first_round_uniform: false }, 3);
        for _ in 0..10 {
            let x = random_vec(3, &mut rng);
            pol.observe(&x, x[0] - x[2]).unwrap();
        }
        let mean: Vec<f64> = pol.stats().mean().iter().copied().collect();
        for _ in 0..20 {
            let c = ctx((0..4).map(|_| random_vec(3, &mut rng)).collect());
            let sel = pol.select(&c, &mut rng).unwrap();
            assert_eq!(sel.arm, c.greedy_arm(&mean));
        }
    }

    #[test]
    fn empty_history_draw_is_scaled_standard_normal() {
        let mut rng = seeded_rng(3);
        let mut pol = LinTs::new(LinTsConfig { scale: 0.7, first_round_uniform: false }, 5);
        let beta = pol.sample_parameter(&mut rng);
        let (z, _) = pol.last_draw().unwrap();
        for (b, z) in beta.iter().zip(z) {
            assert!((b - 0.7 * z).abs() < 1e-14);
        }
    }

    #[test]
    fn lints_draw_replays_through_fresh_cholesky() {
        let mut rng = seeded_rng(4);
        let mut pol = LinTs::new(LinTsConfig { scale: 0.5, first_round_uniform: false }, 5);
        let mut gram = DMatrix::<f64>::identity(5, 5);
        let mut moment = DVector::<f64>::zeros(5);
        for _ in 0..30 {
            let x = random_vec(5, &mut rng);
            let r = x[1] + 0.1 * rng.sample::<f64, _>(StandardNormal);
            pol.observe(&x, r).unwrap();
            let v = DVector::from_column_slice(&x);
            gram += &v * v.transpose();
            moment += v * r;
        }
        pol.sample_parameter(&mut rng);
        let (z, beta) = pol.last_draw().unwrap();
        let chol = gram.clone().cholesky().unwrap();
        let mean = chol.solve(&moment);
        let mut w = DVector::from_column_slice(z);
        chol.l().tr_solve_lower_triangular_mut(&mut w);
        let expected = mean + w * 0.5;
        for (a, b) in beta.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_alpha_linucb_is_greedy() {
        let mut rng = seeded_rng(5);
        let mut pol = LinUcb::new(LinUcbConfig { alpha: 0.0, first_round_uniform: false }, 3);
        for _ in 0..10 {
            let x = random_vec(3, &mut rng);
            pol.observe(&x, 2.0 * x[1]).unwrap();
        }
        let mean: Vec<f64> = pol.stats().mean().iter().copied().collect();
        let c = ctx((0..5).map(|_| random_vec(3, &mut rng)).collect());
        assert_eq!(pol.select(&c, &mut rng).unwrap().arm, c.greedy_arm(&mean));
    }

    #[test]
    fn fresh_linucb_picks_largest_norm() {
        let mut rng = seeded_rng(6);
        let mut pol = LinUcb::new(LinUcbConfig { alpha: 1.0, first_round_uniform: false }, 2);
        let c = ctx(vec![vec![1.0, 0.0], vec![2.0, -2.0], vec![0.0, 1.5]]);
        assert_eq!(pol.select(&c, &mut rng).unwrap().arm, 1);
    }

    #[test]
    fn linucb_scores_match_brute_force() {
        let mut rng = seeded_rng(7);
        let mut pol = LinUcb::new(LinUcbConfig { alpha: 0.8, first_round_uniform: false }, 4);
        let mut gram = DMatrix::<f64>::identity(4, 4);
        let mut moment = DVector::<f64>::zeros(4);
        for _ in 0..15 {
            let x = random_vec(4, &mut rng);
            let r = x[0];
            pol.observe(&x, r).unwrap();
            let v = DVector::from_column_slice(&x);
            gram += &v * v.transpose();
            moment += v * r;
        }
        let inv = gram.try_inverse().unwrap();
        let mean = &inv * &moment;
        let c = ctx((0..3).map(|_| random_vec(4, &mut rng)).collect());
        let brute: Vec<f64> = c
            .vectors
            .iter()
            .map(|x| {
                let v = DVector::from_column_slice(x);
                v.dot(&mean) + 0.8 * (v.transpose() * &inv * &v)[(0, 0)].sqrt()
            })
            .collect();
        for (a, b) in pol.scores(&c).iter().zip(&brute) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(pol.select(&c, &mut rng).unwrap().arm, argmax(brute));
    }
}
