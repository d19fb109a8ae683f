//! Bandit agents and the episode loop.
//!
//! Every agent sees the same interface: it is shown a [`ContextSet`], picks
//! an arm, and is then told the reward of that arm only. Policies keep their
//! own [`History`] of chosen contexts and rewards.

mod episode;
mod estc;
mod linear;
mod sparse;
mod vbts;

pub use episode::{run_episode, EpisodeOptions, RegretTrace, RoundRecord};
pub use estc::{Estc, EstcConfig};
pub use linear::{LinTs, LinTsConfig, LinUcb, LinUcbConfig, RidgeStats};
pub use sparse::{LassoL1, LassoL1Config};
pub use vbts::{Vbts, VbtsConfig};

use std::fmt;

use rand::Rng;

use crate::env::ContextSet;
use crate::linalg::ColumnDesign;
use crate::{Result, SimRng};

/// Chosen contexts and observed rewards, in round order.
#[derive(Debug, Clone)]
pub struct History {
    design: ColumnDesign,
    rewards: Vec<f64>,
}

impl History {
    pub fn new(dim: usize) -> Self {
        History { design: ColumnDesign::new(dim), rewards: Vec::new() }
    }

    pub fn push(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.design.push_row(x)?;
        self.rewards.push(reward);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn design(&self) -> &ColumnDesign {
        &self.design
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.design.columns().iter().map(|c| c[i]).collect()
    }

    /// Round index the next selection is made in.
    pub fn next_round(&self) -> usize {
        self.len() + 1
    }
}

/// Per-round annotations written to traces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct RoundFlags(u8);

impl RoundFlags {
    pub const NONE: RoundFlags = RoundFlags(0);
    /// The arm was drawn uniformly at random.
    pub const UNIFORM: RoundFlags = RoundFlags(1);
    /// The variational fit hit its sweep limit.
    pub const CAVI_NONCONVERGED: RoundFlags = RoundFlags(1 << 1);
    /// The lasso fit hit its sweep limit.
    pub const LASSO_NONCONVERGED: RoundFlags = RoundFlags(1 << 2);

    pub fn contains(self, other: RoundFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: RoundFlags) {
        self.0 |= other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for RoundFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = [
            (RoundFlags::UNIFORM, "uniform"),
            (RoundFlags::CAVI_NONCONVERGED, "cavi_nonconverged"),
            (RoundFlags::LASSO_NONCONVERGED, "lasso_nonconverged"),
        ];
        let mut first = true;
        for (flag, name) in names {
            if self.contains(flag) {
                if !first {
                    f.write_str("|")?;
                }
                f.write_str(name)?;
                first = false;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub arm: usize,
    pub flags: RoundFlags,
}

impl Selection {
    pub fn greedy(arm: usize) -> Self {
        Selection { arm, flags: RoundFlags::NONE }
    }

    pub fn uniform(num_arms: usize, rng: &mut SimRng) -> Self {
        Selection { arm: rng.random_range(0..num_arms), flags: RoundFlags::UNIFORM }
    }
}

pub trait Policy: Send {
    fn name(&self) -> &str;

    fn select(&mut self, ctx: &ContextSet, rng: &mut SimRng) -> Result<Selection>;

    /// Record the reward of the arm played this round.
    fn observe(&mut self, x_chosen: &[f64], reward: f64) -> Result<()>;

    fn history(&self) -> &History;

    /// Point estimate of the parameter, for policies that keep one.
    fn estimate(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Picks an arm uniformly at random every round.
#[derive(Debug, Clone)]
pub struct UniformRandom {
    history: History,
}

impl UniformRandom {
    pub fn new(dim: usize) -> Self {
        UniformRandom { history: History::new(dim) }
    }
}

impl Policy for UniformRandom {
    fn name(&self) -> &str {
        "uniform"
    }

    fn select(&mut self, ctx: &ContextSet, rng: &mut SimRng) -> Result<Selection> {
        Ok(Selection::uniform(ctx.num_arms(), rng))
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)
    }

    fn history(&self) -> &History {
        &self.history
    }
}

/// Knows the true parameter and always plays the best arm.
#[derive(Debug, Clone)]
pub struct Oracle {
    beta_star: Vec<f64>,
    history: History,
}

impl Oracle {
    pub fn new(beta_star: Vec<f64>) -> Self {
        let dim = beta_star.len();
        Oracle { beta_star, history: History::new(dim) }
    }
}

impl Policy for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn select(&mut self, ctx: &ContextSet, _rng: &mut SimRng) -> Result<Selection> {
        Ok(Selection::greedy(ctx.greedy_arm(&self.beta_star)))
    }

    fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
        self.history.push(x, reward)
    }

    fn history(&self) -> &History {
        &self.history
    }

    fn estimate(&self) -> Option<Vec<f64>> {
        Some(self.beta_star.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_render_pipe_separated() {
        let mut f = RoundFlags::UNIFORM;
        assert_eq!(f.to_string(), "uniform");
        f.insert(RoundFlags::CAVI_NONCONVERGED);
        assert_eq!(f.to_string(), "uniform|cavi_nonconverged");
        assert_eq!(RoundFlags::NONE.to_string(), "");
    }

    #[test]
    fn history_rows_round_trip() {
        let mut h = History::new(3);
        h.push(&[1.0, 2.0, 3.0], 0.5).unwrap();
        h.push(&[4.0, 5.0, 6.0], -0.5).unwrap();
        assert_eq!(h.row(1), vec![4.0, 5.0, 6.0]);
        assert_eq!(h.next_round(), 3);
        assert!(h.push(&[1.0], 0.0).is_err());
    }
}
