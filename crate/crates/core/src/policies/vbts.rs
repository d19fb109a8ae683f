use serde::{Deserialize, Serialize};

use super::{History, Policy, RoundFlags, Selection};
use crate::env::ContextSet;
use crate::vb::{
    cavi_fit, cavi_fit_warm, lambda_schedule, posterior_mean, sample_posterior, CaviOptions, LambdaSchedule,
    SpikeSlabPosterior, SpikeSlabPrior,
};
use crate::{Error, Result, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VbtsConfig {
    /// Noise level assumed by the Gaussian working likelihood.
    pub sigma: f64,
    /// Exponent `u` of the `Beta(1, d^u)` inclusion hyperprior.
    pub inclusion_exponent: f64,
    pub lambda: LambdaSchedule,
    pub cavi_tol: f64,
    pub cavi_max_sweeps: usize,
    /// Refit the posterior every `refit_every` rounds; 1 refits every round.
    pub refit_every: usize,
}

impl Default for VbtsConfig {
    fn default() -> Self {
        let cavi = CaviOptions::online();
        VbtsConfig {
            sigma: 1.0,
            inclusion_exponent: 1.0,
            lambda: LambdaSchedule::default(),
            cavi_tol: cavi.tol,
            cavi_max_sweeps: cavi.max_sweeps,
            refit_every: 1,
        }
    }
}

/// Thompson sampling from the spike-and-slab variational posterior.
///
/// Round 1 plays a uniform arm. Every later round refits the posterior on
/// the whole history (warm-started from the previous fit), draws one
/// parameter and plays the greedy arm for that draw.
#[derive(Debug, Clone)]
pub struct Vbts {
    config: VbtsConfig,
    dim: usize,
    history: History,
    posterior: Option<SpikeSlabPosterior>,
    last_sample: Option<Vec<f64>>,
    fits: usize,
}

impl Vbts {
    pub fn new(config: VbtsConfig, dim: usize) -> Result<Self> {
        if config.refit_every == 0 {
            return Err(Error::config("refit_every must be at least 1"));
        }
        // Validates sigma and u up front.
        SpikeSlabPrior::with_inclusion_exponent(1.0, config.sigma, dim, config.inclusion_exponent)?;
        Ok(Vbts { config, dim, history: History::new(dim), posterior: None, last_sample: None, fits: 0 })
    }

    pub fn posterior(&self) -> Option<&SpikeSlabPosterior> {
        self.posterior.as_ref()
    }

    /// Parameter draw used in the most recent non-uniform round.
    pub fn last_sample(&self) -> Option<&[f64]> {
        self.last_sample.as_deref()
    }

    /// Number of variational fits performed so far.
    pub fn fits(&self) -> usize {
        self.fits
    }

    fn refit(&mut self, t: usize) -> Result<bool> {
        let lambda = lambda_schedule(t, self.dim, self.config.lambda)?;
        let prior = SpikeSlabPrior::with_inclusion_exponent(
            lambda,
            self.config.sigma,
            self.dim,
            self.config.inclusion_exponent,
        )?;
        let options =
            CaviOptions { tol: self.config.cavi_tol, max_sweeps: self.config.cavi_max_sweeps, ..CaviOptions::online() };
        let design = self.history.design();
        let rewards = self.history.rewards();
        let post = match &self.posterior {
            Some(prev) => cavi_fit_warm(&prior, design, rewards, prev, options)?,
            None => cavi_fit(&prior, design, rewards, None, options)?,
        };
        let converged = post.converged;
        self.posterior = Some(post);
        self.fits += 1;
        Ok(converged)
    }
}

impl Policy for Vbts {
    fn name(&self) -> &str {
        "vbts"
    }

    fn select(&mut self, ctx: &ContextSet, rng: &mut SimRng) -> Result<Selection> {
        let t = self.history.next_round();
        if t <= 1 {
            return Ok(Selection::uniform(ctx.num_arms(), rng));
        }
        let mut flags = RoundFlags::NONE;
        if (self.posterior.is_none() || (t - 2).is_multiple_of(self.config.refit_every)) && !self.refit(t)? {
            flags.insert(RoundFlags::CAVI_NONCONVERGED);
        }
        let post = self.posterior.as_ref().expect("fitted above");
        let sample = sample_posterior(post, rng);
        let arm = ctx.greedy_arm(&sample);
        self.last_sample = Some(sample);
        Ok(Selection { arm, flags })
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        self.posterior.as_ref().map(posterior_mean)
    }
}
