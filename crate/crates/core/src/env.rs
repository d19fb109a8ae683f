//! Stochastic linear contextual bandit environments.
//!
//! Every round the environment reveals `K` context vectors in `R^d`. The
//! learner picks one arm and observes `<x_chosen, beta*> + noise`. Regret is
//! measured against the arm maximising the noiseless reward.

use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{argmax, dot};
use crate::{Error, Result, SimRng};

/// Law of the context vectors revealed each round.
#[derive(Debug, Clone)]
pub enum ContextDist {
    /// Gaussian with `Sigma_ij = rho` off the diagonal and 1 on it.
    EquiCorrelated { rho: f64 },
    /// Gaussian with `Sigma_ij = phi^|i-j|`.
    AutoRegressive { phi: f64 },
    /// Independent standard normals conditioned on `|x_j| <= x_max`.
    TruncatedGaussian { x_max: f64 },
    /// One row per class drawn from a labelled dataset, in random arm order.
    DatasetPairs(Arc<PairedRows>),
}

/// Feature rows partitioned by a binary label.
#[derive(Debug, Clone)]
pub struct PairedRows {
    rows: Vec<Vec<f64>>,
    class0: Vec<usize>,
    class1: Vec<usize>,
}

impl PairedRows {
    pub fn new(rows: Vec<Vec<f64>>, labels: &[u8]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Dimension { expected: rows.len(), got: labels.len() });
        }
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::config(format!("row {bad} has inconsistent width")));
        }
        let mut class0 = Vec::new();
        let mut class1 = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match l {
                0 => class0.push(i),
                1 => class1.push(i),
                other => return Err(Error::config(format!("label {other} at row {i} is not binary"))),
            }
        }
        if class0.is_empty() || class1.is_empty() {
            return Err(Error::config("both classes need at least one row"));
        }
        Ok(PairedRows { rows, class0, class1 })
    }

    pub fn feature_count(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn class_sizes(&self) -> (usize, usize) {
        (self.class0.len(), self.class1.len())
    }
}

/// Distribution of the additive reward noise.
///
/// All three laws have mean zero and variance `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    #[default]
    Gaussian,
    /// Uniform on `[-sigma*sqrt(3), sigma*sqrt(3)]`.
    Uniform,
    /// `+-sigma` with equal probability.
    Rademacher,
}

/// Full description of a bandit instance.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub num_arms: usize,
    pub dim: usize,
    pub context_dist: ContextDist,
    pub beta_star: Vec<f64>,
    pub noise_sigma: f64,
    pub noise_law: NoiseLaw,
    /// Coordinate-wise clamp applied to every sampled context.
    pub clip_x_max: Option<f64>,
}

impl EnvSpec {
    pub fn new(num_arms: usize, context_dist: ContextDist, beta_star: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        let spec = EnvSpec {
            num_arms,
            dim: beta_star.len(),
            context_dist,
            beta_star,
            noise_sigma,
            noise_law: NoiseLaw::Gaussian,
            clip_x_max: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_clip(mut self, x_max: f64) -> Result<Self> {
        self.clip_x_max = Some(x_max);
        self.validate()?;
        Ok(self)
    }

    pub fn with_noise_law(mut self, law: NoiseLaw) -> Self {
        self.noise_law = law;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_arms == 0 {
            return Err(Error::config("num_arms must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::config("dim must be at least 1"));
        }
        if self.beta_star.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: self.beta_star.len() });
        }
        crate::linalg::check_finite(&self.beta_star, "beta_star")?;
        // sigma = 0 is allowed for noiseless test instances.
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::config("noise_sigma must be finite and non-negative"));
        }
        if let Some(x_max) = self.clip_x_max {
            if !(x_max > 0.0 && x_max.is_finite()) {
                return Err(Error::config("clip_x_max must be positive"));
            }
        }
        match &self.context_dist {
            ContextDist::EquiCorrelated { rho } if !(0.0..1.0).contains(rho) => {
                Err(Error::config("equicorrelation rho must lie in [0, 1)"))
            }
            ContextDist::AutoRegressive { phi } if !(phi.abs() < 1.0) => {
                Err(Error::config("autoregressive phi must lie in (-1, 1)"))
            }
            ContextDist::TruncatedGaussian { x_max } if !(*x_max > 0.0 && x_max.is_finite()) => {
                Err(Error::config("truncation bound must be positive"))
            }
            ContextDist::DatasetPairs(pairs) => {
                if pairs.feature_count() != self.dim {
                    return Err(Error::config(format!(
                        "dataset has {} features but the environment has dim {}",
                        pairs.feature_count(),
                        self.dim
                    )));
                }
                if self.num_arms != 2 {
                    return Err(Error::config("dataset-pair environments have exactly 2 arms"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Population covariance of a single context vector, when it has a
    /// closed form.
    pub fn context_covariance(&self) -> Option<Vec<Vec<f64>>> {
        let d = self.dim;
        let entry: Box<dyn Fn(usize, usize) -> f64> = match self.context_dist {
            ContextDist::EquiCorrelated { rho } => Box::new(move |i, j| if i == j { 1.0 } else { rho }),
            ContextDist::AutoRegressive { phi } => {
                Box::new(move |i, j| phi.powi((i as i64 - j as i64).unsigned_abs() as i32))
            }
            _ => return None,
        };
        Some((0..d).map(|i| (0..d).map(|j| entry(i, j)).collect()).collect())
    }

    /// Draw the context set revealed at round `t`.
    pub fn sample_contexts(&self, rng: &mut SimRng, t: usize) -> Result<ContextSet> {
        let (vectors, labels) = match &self.context_dist {
            ContextDist::DatasetPairs(pairs) => {
                if pairs.feature_count() != self.dim {
                    return Err(Error::config("dataset feature count does not match dim"));
                }
                let one = pairs.class1[rng.random_range(0..pairs.class1.len())];
                let zero = pairs.class0[rng.random_range(0..pairs.class0.len())];
                if rng.random::<bool>() {
                    (vec![pairs.rows[one].clone(), pairs.rows[zero].clone()], Some(vec![1, 0]))
                } else {
                    (vec![pairs.rows[zero].clone(), pairs.rows[one].clone()], Some(vec![0, 1]))
                }
            }
            dist => {
                let vectors = (0..self.num_arms).map(|_| self.gaussian_draw(dist, rng)).collect();
                (vectors, None)
            }
        };
        let mut ctx = ContextSet { round: t, vectors, labels };
        if let Some(x_max) = self.clip_x_max {
            for v in &mut ctx.vectors {
                for x in v.iter_mut() {
                    *x = x.clamp(-x_max, x_max);
                }
            }
        }
        Ok(ctx)
    }

    fn gaussian_draw(&self, dist: &ContextDist, rng: &mut SimRng) -> Vec<f64> {
        let d = self.dim;
        match *dist {
            ContextDist::EquiCorrelated { rho } => {
                // x = sqrt(rho) z0 1 + sqrt(1 - rho) z
                let shared = rho.sqrt() * rng.sample::<f64, _>(StandardNormal);
                let own = (1.0 - rho).sqrt();
                (0..d).map(|_| shared + own * rng.sample::<f64, _>(StandardNormal)).collect()
            }
            ContextDist::AutoRegressive { phi } => {
                let innovation = (1.0 - phi * phi).sqrt();
                let mut out = Vec::with_capacity(d);
                let mut prev: f64 = rng.sample(StandardNormal);
                out.push(prev);
                for _ in 1..d {
                    prev = phi * prev + innovation * rng.sample::<f64, _>(StandardNormal);
                    out.push(prev);
                }
                out
            }
            ContextDist::TruncatedGaussian { x_max } => (0..d)
                .map(|_| loop {
                    let z: f64 = rng.sample(StandardNormal);
                    if z.abs() <= x_max {
                        break z;
                    }
                })
                .collect(),
            ContextDist::DatasetPairs(_) => unreachable!("handled by sample_contexts"),
        }
    }

    /// Draw one noise value from the configured law.
    pub fn draw_noise(&self, rng: &mut SimRng) -> f64 {
        let sigma = self.noise_sigma;
        match self.noise_law {
            NoiseLaw::Gaussian => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseLaw::Uniform => {
                let half = sigma * 3f64.sqrt();
                rng.random_range(-1.0..=1.0) * half
            }
            NoiseLaw::Rademacher => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
        }
    }

    /// Reward for playing context `x_chosen`, returned with the noise draw.
    pub fn realize_reward(&self, x_chosen: &[f64], rng: &mut SimRng) -> Result<(f64, f64)> {
        if x_chosen.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: x_chosen.len() });
        }
        let noise = self.draw_noise(rng);
        Ok((dot(x_chosen, &self.beta_star) + noise, noise))
    }

    /// Regret bookkeeping for one round. The noise field is left empty.
    pub fn score_round(&self, ctx: &ContextSet, chosen: usize) -> Result<RoundOutcome> {
        if chosen >= ctx.vectors.len() {
            return Err(Error::config(format!("arm {chosen} out of range for {} arms", ctx.vectors.len())));
        }
        let means: Vec<f64> = ctx.vectors.iter().map(|x| dot(x, &self.beta_star)).collect();
        let oracle_arm = argmax(means.iter().copied());
        // Clamp guards against -0.0 and rounding in the subtraction.
        let regret = (means[oracle_arm] - means[chosen]).max(0.0);
        Ok(RoundOutcome { chosen_arm: chosen, reward: f64::NAN, oracle_arm, instantaneous_regret: regret, noise: None })
    }
}

/// The `K` context vectors revealed in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextSet {
    pub round: usize,
    pub vectors: Vec<Vec<f64>>,
    /// Class label of each arm for dataset-derived environments.
    pub labels: Option<Vec<u8>>,
}

impl ContextSet {
    pub fn num_arms(&self) -> usize {
        self.vectors.len()
    }

    /// Arm maximising `<x_i, beta>`, lowest index on ties.
    pub fn greedy_arm(&self, beta: &[f64]) -> usize {
        argmax(self.vectors.iter().map(|x| dot(x, beta)))
    }
}

/// What happened in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub chosen_arm: usize,
    pub reward: f64,
    pub oracle_arm: usize,
    pub instantaneous_regret: f64,
    /// Populated only when the episode runner is asked to keep noise draws.
    pub noise: Option<f64>,
}

/// Anything that can produce context sets for a fixed true parameter.
pub trait ContextSource {
    fn beta_star(&self) -> &[f64];
    fn draw(&self, rng: &mut SimRng, t: usize) -> Result<ContextSet>;

    /// Additive reward noise; noise-free unless overridden.
    fn draw_noise(&self, _rng: &mut SimRng) -> f64 {
        0.0
    }
}

impl ContextSource for EnvSpec {
    fn beta_star(&self) -> &[f64] {
        &self.beta_star
    }

    fn draw(&self, rng: &mut SimRng, t: usize) -> Result<ContextSet> {
        self.sample_contexts(rng, t)
    }

    fn draw_noise(&self, rng: &mut SimRng) -> f64 {
        EnvSpec::draw_noise(self, rng)
    }
}

/// How the nonzero block of the true parameter is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaScheme {
    /// Magnitudes i.i.d. Uniform(0.3, 1).
    Setup1,
    /// Entries i.i.d. standard normal.
    Setup2,
}

/// Sparse unit-norm parameter with a uniformly random support of size `sparsity`.
pub fn generate_beta(dim: usize, sparsity: usize, scheme: BetaScheme, rng: &mut SimRng) -> Result<Vec<f64>> {
    if sparsity == 0 || sparsity > dim {
        return Err(Error::config(format!("sparsity {sparsity} must lie in 1..={dim}")));
    }
    let mut support = index::sample(rng, dim, sparsity).into_vec();
    support.sort_unstable();
    let values: Vec<f64> = loop {
        let draw: Vec<f64> = match scheme {
            BetaScheme::Setup1 => (0..sparsity).map(|_| rng.random_range(0.3..1.0)).collect(),
            BetaScheme::Setup2 => (0..sparsity).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        };
        if draw.iter().any(|v| *v != 0.0) {
            break draw;
        }
    };
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut beta = vec![0.0; dim];
    for (&j, v) in support.iter().zip(values) {
        beta[j] = v / norm;
    }
    Ok(beta)
}
