//! Slow reference computations used to check the fast paths in tests.
//!
//! Nothing here is tuned for speed; everything is written to be obviously
//! correct instead.

use crate::linalg::ColumnDesign;
use crate::vb::SpikeSlabPrior;
use crate::{Error, Result};

/// `n`-point Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut deriv = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            deriv = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / deriv;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * deriv * deriv);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[lo, hi]` with a panel edge at 0.
fn composite_rule(lo: f64, hi: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre(order);
    let mut edges = vec![lo];
    if lo < 0.0 && hi > 0.0 {
        edges.push(0.0);
    }
    edges.push(hi);
    let mut out = Vec::new();
    for seg in edges.windows(2) {
        let h = (seg[1] - seg[0]) / panels as f64;
        for p in 0..panels {
            let a = seg[0] + p as f64 * h;
            for (x, w) in gx.iter().zip(&gw) {
                out.push((a + 0.5 * h * (x + 1.0), 0.5 * h * w));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub log_evidence: f64,
    pub mean: Vec<f64>,
    pub inclusion: Vec<f64>,
}

/// Exact posterior of the spike-and-slab model for `d <= 2` by summing over
/// supports and integrating each slab block numerically. The inclusion
/// probability is held at the prior mean, as in the variational fit.
pub fn exact_spike_slab(prior: &SpikeSlabPrior, design: &ColumnDesign, y: &[f64]) -> Result<ExactPosterior> {
    let d = design.dim();
    if d > 2 || d != prior.dim {
        return Err(Error::input("exact posterior supports d <= 2 only"));
    }
    let n = design.rows();
    let sigma2 = prior.noise_sigma * prior.noise_sigma;
    let kappa = prior.laplace_rate();
    let w = prior.inclusion_prob();
    let gram: Vec<Vec<f64>> =
        (0..d).map(|i| (0..d).map(|j| dot(design.column(i), design.column(j))).collect()).collect();
    let xty: Vec<f64> = (0..d).map(|j| dot(design.column(j), y)).collect();
    let yy = dot(y, y);
    let log_lik = |beta: &[f64]| {
        let mut q = yy;
        for i in 0..d {
            q -= 2.0 * beta[i] * xty[i];
            for j in 0..d {
                q += beta[i] * gram[i][j] * beta[j];
            }
        }
        -0.5 * n as f64 * (2.0 * std::f64::consts::PI * sigma2).ln() - q / (2.0 * sigma2)
    };

    let mut log_terms = Vec::new();
    let mut means = Vec::new();
    for mask in 0..(1usize << d) {
        let support: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        let k = support.len();
        let log_prior = k as f64 * w.ln() + (d - k) as f64 * (1.0 - w).ln();
        if k == 0 {
            log_terms.push(log_prior + log_lik(&vec![0.0; d]));
            means.push(vec![0.0; d]);
            continue;
        }
        // Unpenalised optimum and curvature of the likelihood on the support.
        let (centre, sd) = if k == 1 {
            let g = gram[support[0]][support[0]];
            if g <= 0.0 {
                return Err(Error::input("design column is zero on the support"));
            }
            (vec![xty[support[0]] / g], vec![(sigma2 / g).sqrt()])
        } else {
            let (a, b, c) = (gram[0][0], gram[0][1], gram[1][1]);
            let det = a * c - b * b;
            if det <= 1e-12 * a * c {
                return Err(Error::input("design is singular on the support"));
            }
            let m = vec![(c * xty[0] - b * xty[1]) / det, (a * xty[1] - b * xty[0]) / det];
            (m, vec![(sigma2 * c / det).sqrt(), (sigma2 * a / det).sqrt()])
        };
        let rules: Vec<Vec<(f64, f64)>> = centre
            .iter()
            .zip(&sd)
            .map(|(&m, &s)| {
                let half = 14.0 * s + m.abs();
                composite_rule((m - half).min(-s), (m + half).max(s), if k == 1 { 400 } else { 40 }, 12)
            })
            .collect();
        let mut full = vec![0.0; d];
        for (idx, &j) in support.iter().enumerate() {
            full[j] = centre[idx];
        }
        let shift = log_lik(&full) + k as f64 * (kappa / 2.0).ln();
        let mut z = 0.0;
        let mut first = vec![0.0; d];
        let mut beta = vec![0.0; d];
        let mut visit = |beta: &[f64], weight: f64| {
            let l1: f64 = support.iter().map(|&j| beta[j].abs()).sum();
            let v = weight * (log_lik(beta) + k as f64 * (kappa / 2.0).ln() - kappa * l1 - shift).exp();
            z += v;
            for &j in &support {
                first[j] += v * beta[j];
            }
        };
        if k == 1 {
            for &(x, wt) in &rules[0] {
                beta[support[0]] = x;
                visit(&beta, wt);
            }
        } else {
            for &(x0, w0) in &rules[0] {
                for &(x1, w1) in &rules[1] {
                    beta[0] = x0;
                    beta[1] = x1;
                    visit(&beta, w0 * w1);
                }
            }
        }
        log_terms.push(log_prior + shift + z.ln());
        means.push(first.iter().map(|f| f / z).collect());
    }
    let top = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_terms.iter().map(|l| (l - top).exp()).sum();
    let log_evidence = top + total.ln();
    let mut mean = vec![0.0; d];
    let mut inclusion = vec![0.0; d];
    for (mask, (l, m)) in log_terms.iter().zip(&means).enumerate() {
        let p = (l - log_evidence).exp();
        for j in 0..d {
            mean[j] += p * m[j];
            if mask >> j & 1 == 1 {
                inclusion[j] += p;
            }
        }
    }
    Ok(ExactPosterior { log_evidence, mean, inclusion })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let scale: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Extreme eigenvalues over every nonempty principal submatrix of size at
/// most `s`.
pub fn brute_force_sparse_eigen(matrix: &[Vec<f64>], s: usize) -> (f64, f64) {
    let d = matrix.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for mask in 1usize..(1 << d) {
        let idx: Vec<usize> = (0..d).filter(|j| mask >> j & 1 == 1).collect();
        if idx.len() > s {
            continue;
        }
        let sub: Vec<Vec<f64>> = idx.iter().map(|&i| idx.iter().map(|&j| matrix[i][j]).collect()).collect();
        let eig = jacobi_eigenvalues(&sub);
        lo = lo.min(eig[0]);
        hi = hi.max(eig[eig.len() - 1]);
    }
    (lo, hi)
}
