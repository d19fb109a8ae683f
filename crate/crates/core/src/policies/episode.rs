use std::time::Instant;

use super::{Policy, RoundFlags};
use crate::env::ContextSource;
use crate::linalg::{argmax, dot};
use crate::{Error, Result, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOptions {
    pub horizon: usize,
    /// Record the policy's point estimate every this many rounds.
    pub log_every: Option<usize>,
    pub keep_noise: bool,
}

impl EpisodeOptions {
    pub fn new(horizon: usize) -> Self {
        EpisodeOptions { horizon, log_every: None, keep_noise: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub regret: f64,
    pub cum_regret: f64,
    /// Wall-clock time spent in `select` and `observe`.
    pub micros: u64,
    pub arm: usize,
    pub flags: RoundFlags,
    /// Class label of the chosen arm in dataset environments.
    pub label: Option<u8>,
    pub noise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub policy: String,
    pub replication: usize,
    pub rounds: Vec<RoundRecord>,
    pub estimate_log: Vec<(usize, Vec<f64>)>,
    /// Set when the policy failed; `rounds` then holds the completed prefix.
    pub error: Option<String>,
    pub total_seconds: f64,
}

impl RegretTrace {
    pub fn cumulative_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cum_regret)
    }

    /// Fraction of rounds in which a label-1 arm was played.
    pub fn accuracy(&self) -> Option<f64> {
        let labelled: Vec<u8> = self.rounds.iter().filter_map(|r| r.label).collect();
        if labelled.is_empty() {
            return None;
        }
        Some(labelled.iter().filter(|&&l| l == 1).count() as f64 / labelled.len() as f64)
    }

    pub fn mean_round_seconds(&self) -> f64 {
        if self.rounds.is_empty() {
            return 0.0;
        }
        self.rounds.iter().map(|r| r.micros as f64).sum::<f64>() * 1e-6 / self.rounds.len() as f64
    }
}

/// Play `policy` against `env` for `options.horizon` rounds.
///
/// Contexts and reward noise come from `env_rng`; the policy's own
/// randomness comes from `policy_rng`, so two policies given the same
/// environment stream face identical contexts. A policy error stops the
/// episode and is stored in the returned trace.
pub fn run_episode<E: ContextSource + ?Sized>(
    policy: &mut dyn Policy,
    env: &E,
    options: &EpisodeOptions,
    replication: usize,
    env_rng: &mut SimRng,
    policy_rng: &mut SimRng,
) -> Result<RegretTrace> {
    if options.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    if options.log_every == Some(0) {
        return Err(Error::config("log_every must be at least 1"));
    }
    let started = Instant::now();
    let mut trace = RegretTrace {
        policy: policy.name().to_string(),
        replication,
        rounds: Vec::with_capacity(options.horizon),
        estimate_log: Vec::new(),
        error: None,
        total_seconds: 0.0,
    };
    let beta = env.beta_star();
    let mut cum = 0.0;
    for t in 1..=options.horizon {
        let ctx = env.draw(env_rng, t)?;
        let clock = Instant::now();
        let step = policy.select(&ctx, policy_rng).and_then(|sel| {
            if sel.arm >= ctx.num_arms() {
                return Err(Error::input(format!("policy chose arm {} of {}", sel.arm, ctx.num_arms())));
            }
            Ok(sel)
        });
        let sel = match step {
            Ok(sel) => sel,
            Err(e) => {
                trace.error = Some(format!("round {t}: {e}"));
                break;
            }
        };
        let means: Vec<f64> = ctx.vectors.iter().map(|x| dot(x, beta)).collect();
        let best = means[argmax(means.iter().copied())];
        let regret = (best - means[sel.arm]).max(0.0);
        let noise = env.draw_noise(env_rng);
        let x = &ctx.vectors[sel.arm];
        if let Err(e) = policy.observe(x, means[sel.arm] + noise) {
            trace.error = Some(format!("round {t}: {e}"));
            break;
        }
        let micros = clock.elapsed().as_micros() as u64;
        cum += regret;
        trace.rounds.push(RoundRecord {
            t,
            regret,
            cum_regret: cum,
            micros,
            arm: sel.arm,
            flags: sel.flags,
            label: ctx.labels.as_ref().map(|l| l[sel.arm]),
            noise: options.keep_noise.then_some(noise),
        });
        if let Some(k) = options.log_every {
            if t % k == 0 {
                if let Some(est) = policy.estimate() {
                    trace.estimate_log.push((t, est));
                }
            }
        }
    }
    trace.total_seconds = started.elapsed().as_secs_f64();
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ContextDist, ContextSet, EnvSpec};
    use crate::policies::{History, Oracle, Selection, UniformRandom};
    use crate::seeded_rng;

    struct FixedPair;

    impl ContextSource for FixedPair {
        fn beta_star(&self) -> &[f64] {
            &[1.0, 0.0, 0.0]
        }

        fn draw(&self, _rng: &mut SimRng, t: usize) -> Result<ContextSet> {
            Ok(ContextSet { round: t, vectors: vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]], labels: None })
        }
    }

    fn ec_env() -> EnvSpec {
        let beta = vec![0.6, 0.0, -0.8, 0.0, 0.0];
        EnvSpec::new(4, ContextDist::EquiCorrelated { rho: 0.3 }, beta, 0.5).unwrap()
    }

    #[test]
    fn oracle_has_zero_regret() {
        let env = ec_env();
        let mut pol = Oracle::new(env.beta_star.clone());
        let trace =
            run_episode(&mut pol, &env, &EpisodeOptions::new(300), 0, &mut seeded_rng(1), &mut seeded_rng(2)).unwrap();
        assert!(trace.rounds.iter().all(|r| r.cum_regret == 0.0));
        assert_eq!(pol.history().len(), 300);
    }

    #[test]
    fn uniform_regret_on_fixed_pair() {
        let mut pol = UniformRandom::new(3);
        let trace =
            run_episode(&mut pol, &FixedPair, &EpisodeOptions::new(10_000), 0, &mut seeded_rng(3), &mut seeded_rng(4))
                .unwrap();
        let mean = trace.cumulative_regret() / 10_000.0;
        assert!((0.97..=1.03).contains(&mean), "mean regret {mean}");
    }

    #[test]
    fn cumulative_is_exact_prefix_sum() {
        let env = ec_env();
        let mut pol = UniformRandom::new(5);
        let trace =
            run_episode(&mut pol, &env, &EpisodeOptions::new(500), 0, &mut seeded_rng(5), &mut seeded_rng(6)).unwrap();
        let mut acc = 0.0;
        for (i, r) in trace.rounds.iter().enumerate() {
            acc += r.regret;
            assert_eq!(r.t, i + 1);
            assert_eq!(r.cum_regret, acc);
        }
    }

    #[test]
    fn history_holds_chosen_contexts() {
        let env = ec_env();
        let mut pol = UniformRandom::new(5);
        let opts = EpisodeOptions { keep_noise: true, ..EpisodeOptions::new(50) };
        let mut env_rng = seeded_rng(7);
        let trace = run_episode(&mut pol, &env, &opts, 0, &mut env_rng, &mut seeded_rng(8)).unwrap();
        let mut replay = seeded_rng(7);
        for (i, r) in trace.rounds.iter().enumerate() {
            let ctx = env.sample_contexts(&mut replay, i + 1).unwrap();
            let noise = env.draw_noise(&mut replay);
            assert_eq!(Some(noise), r.noise);
            assert_eq!(pol.history().row(i), ctx.vectors[r.arm]);
            assert_eq!(pol.history().rewards()[i], dot(&ctx.vectors[r.arm], &env.beta_star) + noise);
        }
    }

    struct Failing(History);

    impl Policy for Failing {
        fn name(&self) -> &str {
            "failing"
        }
        fn select(&mut self, _ctx: &ContextSet, _rng: &mut SimRng) -> Result<Selection> {
            if self.0.len() == 3 {
                Err(Error::input("boom"))
            } else {
                Ok(Selection::greedy(0))
            }
        }
        fn observe(&mut self, x: &[f64], reward: f64) -> Result<()> {
            self.0.push(x, reward)
        }
        fn history(&self) -> &History {
            &self.0
        }
    }

    #[test]
    fn policy_error_gives_partial_trace() {
        let env = ec_env();
        let mut pol = Failing(History::new(5));
        let trace =
            run_episode(&mut pol, &env, &EpisodeOptions::new(10), 2, &mut seeded_rng(9), &mut seeded_rng(10)).unwrap();
        assert_eq!(trace.rounds.len(), 3);
        assert!(trace.error.as_deref().unwrap().contains("round 4"));
        assert_eq!(trace.replication, 2);
    }

    #[test]
    fn estimate_log_cadence() {
        let env = ec_env();
        let mut pol = Oracle::new(env.beta_star.clone());
        let opts = EpisodeOptions { log_every: Some(10), ..EpisodeOptions::new(95) };
        let trace = run_episode(&mut pol, &env, &opts, 0, &mut seeded_rng(1), &mut seeded_rng(2)).unwrap();
        assert_eq!(trace.estimate_log.len(), 9);
        assert_eq!(trace.estimate_log[0].0, 10);
    }
}
