//! Fast paths checked against slow independent references.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use vbts::diagnostics::{sparse_eigen, EigenMode};
use vbts::env::{ContextDist, EnvSpec};
use vbts::oracle::{brute_force_sparse_eigen, exact_spike_slab};
use vbts::policies::{run_episode, EpisodeOptions, Policy, Vbts, VbtsConfig};
use vbts::vb::{cavi_fit, elbo, posterior_mean, CaviOptions, SpikeSlabPrior};
use vbts::{seeded_rng, ColumnDesign, SimRng};

fn small_regression(seed: u64) -> (ColumnDesign, Vec<f64>, Vec<f64>) {
    let mut rng = seeded_rng(seed);
    let n = 25;
    let beta = [rng.random_range(-1.5..1.5), if seed.is_multiple_of(3) { 0.0 } else { rng.random_range(-1.0..1.0) }];
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let y: Vec<f64> =
        rows.iter().map(|r| r[0] * beta[0] + r[1] * beta[1] + 0.8 * rng.sample::<f64, _>(StandardNormal)).collect();
    (ColumnDesign::from_rows(&rows, 2).unwrap(), y, beta.to_vec())
}

#[test]
fn cavi_mean_close_to_exact_posterior_and_elbo_below_evidence() {
    for seed in 0..10 {
        let (design, y, _) = small_regression(seed);
        let prior = SpikeSlabPrior::new(1.0, 0.8, 2).unwrap();
        let exact = exact_spike_slab(&prior, &design, &y).unwrap();
        let post = cavi_fit(&prior, &design, &y, None, CaviOptions::offline()).unwrap();
        let vb_mean = posterior_mean(&post);
        for j in 0..2 {
            assert!((vb_mean[j] - exact.mean[j]).abs() < 0.05, "seed {seed}: {vb_mean:?} vs {:?}", exact.mean);
        }
        let bound = elbo(&prior, &design, &y, &post).unwrap();
        assert!(bound <= exact.log_evidence + 1e-9, "seed {seed}: {bound} > {}", exact.log_evidence);
    }
}

#[test]
fn sparse_eigen_matches_brute_force() {
    let mut rng = seeded_rng(11);
    for _ in 0..20 {
        let d = rng.random_range(3..=8);
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = &a * a.transpose();
        let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| m[(i, j)]).collect()).collect();
        for s in 1..=3.min(d) {
            let fast = sparse_eigen(&m, s, EigenMode::Exact).unwrap();
            let (lo, hi) = brute_force_sparse_eigen(&rows, s);
            assert!((fast.phi_min - lo).abs() < 1e-10 && (fast.phi_max - hi).abs() < 1e-10);
        }
    }
}

#[test]
fn vbts_choice_replays_from_logged_sample() {
    let mut env_rng = seeded_rng(20);
    let beta = vbts::env::generate_beta(20, 3, vbts::env::BetaScheme::Setup1, &mut env_rng).unwrap();
    let env = EnvSpec::new(3, ContextDist::EquiCorrelated { rho: 0.3 }, beta, 0.5).unwrap();
    let mut pol = Vbts::new(VbtsConfig::default(), 20).unwrap();
    let mut policy_rng: SimRng = seeded_rng(21);
    run_episode(&mut pol, &env, &EpisodeOptions::new(49), 0, &mut env_rng, &mut policy_rng).unwrap();
    let ctx = env.sample_contexts(&mut env_rng, 50).unwrap();
    let sel = pol.select(&ctx, &mut policy_rng).unwrap();
    let sample = pol.last_sample().unwrap();
    let scores: Vec<f64> = ctx.vectors.iter().map(|x| x.iter().zip(sample).map(|(a, b)| a * b).sum()).collect();
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    assert_eq!(sel.arm, best);
}
