//! Numerical versions of the design and environment quantities that appear
//! in the regret analysis: sparse extreme eigenvalues, compatibility
//! numbers over restricted cones, the transfer inequality between two Gram
//! matrices, the margin exponent of a context distribution and the decay of
//! estimation error along an episode.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::env::ContextSource;
use crate::linalg::{dot, ColumnDesign};
use crate::{seeded_rng, Error, Result, SimRng};

pub use nalgebra::DMatrix as Matrix;

/// Largest number of principal submatrices exact enumeration will visit.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

const SYMMETRY_TOL: f64 = 1e-12;

/// `X^T X / n` for the rows stored in `design`.
pub fn gram_matrix(design: &ColumnDesign) -> DMatrix<f64> {
    let d = design.dim();
    let n = design.rows().max(1) as f64;
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = dot(design.column(i), design.column(j)) / n;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..m.nrows() {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::input(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMode {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEigen {
    pub phi_min: f64,
    pub phi_max: f64,
    pub min_support: Vec<usize>,
    pub max_support: Vec<usize>,
    /// False for greedy results, which only bound the true values:
    /// `phi_min` from above and `phi_max` from below.
    pub certified: bool,
}

fn extreme_eigenvalues(m: &DMatrix<f64>, idx: &[usize]) -> (f64, f64) {
    if idx.len() == 1 {
        let v = m[(idx[0], idx[0])];
        return (v, v);
    }
    let sub = m.select_rows(idx).select_columns(idx);
    let eig = SymmetricEigen::new(sub).eigenvalues;
    (eig.min(), eig.max())
}

/// Minimum and maximum eigenvalues over principal submatrices of size at
/// most `s`.
///
/// Exact mode visits every support of size exactly `s`; by eigenvalue
/// interlacing smaller supports cannot do better.
pub fn sparse_eigen(m: &DMatrix<f64>, s: usize, mode: EigenMode) -> Result<SparseEigen> {
    check_symmetric(m)?;
    let d = m.nrows();
    if s == 0 || s > d {
        return Err(Error::input(format!("sparsity {s} outside 1..={d}")));
    }
    match mode {
        EigenMode::Exact => {
            let needed = binomial(d, s);
            if needed > ENUMERATION_BUDGET {
                return Err(Error::Budget { needed, budget: ENUMERATION_BUDGET });
            }
            let mut out = SparseEigen {
                phi_min: f64::INFINITY,
                phi_max: f64::NEG_INFINITY,
                min_support: Vec::new(),
                max_support: Vec::new(),
                certified: true,
            };
            let mut idx: Vec<usize> = (0..s).collect();
            loop {
                let (lo, hi) = extreme_eigenvalues(m, &idx);
                if lo < out.phi_min {
                    out.phi_min = lo;
                    out.min_support = idx.clone();
                }
                if hi > out.phi_max {
                    out.phi_max = hi;
                    out.max_support = idx.clone();
                }
                if !next_combination(&mut idx, d) {
                    break;
                }
            }
            Ok(out)
        }
        EigenMode::Greedy => {
            let (phi_min, min_support) = greedy_support(m, s, |lo, _| lo);
            let (neg_max, max_support) = greedy_support(m, s, |_, hi| -hi);
            Ok(SparseEigen { phi_min, phi_max: -neg_max, min_support, max_support, certified: false })
        }
    }
}

/// Advance `idx` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Forward selection minimising `score(lambda_min, lambda_max)`.
fn greedy_support(m: &DMatrix<f64>, s: usize, score: impl Fn(f64, f64) -> f64) -> (f64, Vec<usize>) {
    let d = m.nrows();
    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut best = f64::INFINITY;
    while support.len() < s {
        let mut pick = None;
        best = f64::INFINITY;
        for j in 0..d {
            if support.contains(&j) {
                continue;
            }
            let mut trial = support.clone();
            trial.push(j);
            let (lo, hi) = extreme_eigenvalues(m, &trial);
            let v = score(lo, hi);
            if v < best {
                best = v;
                pick = Some(j);
            }
        }
        support.push(pick.expect("fewer than d indices chosen"));
    }
    support.sort_unstable();
    (best, support)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompatibilityMethod {
    /// Projected gradient on each sign orthant of the cone slice.
    ProjectedDescent,
    /// Best of many random points of the cone slice.
    VertexGrid { samples: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Compatibility {
    /// Smallest objective value found, an upper bound on the infimum.
    pub value: f64,
    pub argmin: Vec<f64>,
    /// True when every sign orthant was solved, so `value` is the infimum up
    /// to solver tolerance.
    pub certified: bool,
}

/// Largest dimension for which all sign orthants are solved.
const ORTHANT_ENUMERATION_MAX_DIM: usize = 6;
const RESTARTS: usize = 32;

/// `inf |S| d^T M d / ||d||_1^2` over the cone
/// `{d != 0 : ||d_{S^c}||_1 <= alpha ||d_S||_1}`.
pub fn compatibility(
    m: &DMatrix<f64>,
    support: &[usize],
    alpha: f64,
    method: CompatibilityMethod,
    seed: u64,
) -> Result<Compatibility> {
    check_symmetric(m)?;
    let d = m.nrows();
    if support.is_empty() {
        return Err(Error::input("support set must be nonempty"));
    }
    if support.iter().any(|&j| j >= d) {
        return Err(Error::input("support index out of range"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::input("cone factor must be positive"));
    }
    let mut in_s = vec![false; d];
    for &j in support {
        in_s[j] = true;
    }
    let slice = ConeSlice { in_s, min_on_support: 1.0 / (1.0 + alpha) };
    let k = slice.in_s.iter().filter(|&&b| b).count() as f64;
    let mut rng = seeded_rng(seed);
    let (value, argmin, certified) = match method {
        CompatibilityMethod::ProjectedDescent => descent_search(m, &slice, &mut rng),
        CompatibilityMethod::VertexGrid { samples } => {
            if d > 16 {
                return Err(Error::input("vertex grid is limited to d <= 16"));
            }
            let (v, x) = grid_search(m, &slice, samples, &mut rng);
            (v, x, false)
        }
    };
    Ok(Compatibility { value: k * value, argmin, certified })
}

struct ConeSlice {
    in_s: Vec<bool>,
    min_on_support: f64,
}

impl ConeSlice {
    /// Euclidean projection of `v` onto
    /// `{w >= 0, sum w = 1, sum_S w >= min_on_support}`.
    fn project(&self, v: &[f64]) -> Vec<f64> {
        let w = project_simplex(v, 1.0);
        let on: f64 = w.iter().zip(&self.in_s).filter(|(_, &s)| s).map(|(x, _)| x).sum();
        if on >= self.min_on_support || self.in_s.iter().all(|&s| s) {
            return w;
        }
        // The mass constraint is active: project each block on its own simplex.
        let a = self.min_on_support;
        let (vs, vc): (Vec<f64>, Vec<f64>) = (
            v.iter().zip(&self.in_s).filter(|(_, &s)| s).map(|(x, _)| *x).collect(),
            v.iter().zip(&self.in_s).filter(|(_, &s)| !s).map(|(x, _)| *x).collect(),
        );
        let (ws, wc) = (project_simplex(&vs, a), project_simplex(&vc, 1.0 - a));
        let (mut is, mut ic) = (ws.into_iter(), wc.into_iter());
        self.in_s.iter().map(|&s| if s { is.next().unwrap() } else { ic.next().unwrap() }).collect()
    }
}

/// Projection onto `{w >= 0, sum w = mass}`.
fn project_simplex(v: &[f64], mass: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - mass) / (i + 1) as f64;
        if u - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

fn quad(m: &DMatrix<f64>, signs: &[f64], w: &[f64]) -> f64 {
    let d = w.len();
    let mut acc = 0.0;
    for i in 0..d {
        let mut row = 0.0;
        for j in 0..d {
            row += m[(i, j)] * signs[j] * w[j];
        }
        acc += signs[i] * w[i] * row;
    }
    acc
}

/// Accelerated projected gradient for `min w^T D M D w` over the slice,
/// with `D = diag(signs)`.
fn solve_orthant(m: &DMatrix<f64>, slice: &ConeSlice, signs: &[f64], lipschitz: f64, start: &[f64]) -> (f64, Vec<f64>) {
    let d = signs.len();
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let mut x = slice.project(start);
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut fx = quad(m, signs, &x);
    for _ in 0..10_000 {
        let mut grad = vec![0.0; d];
        for i in 0..d {
            let mut g = 0.0;
            for j in 0..d {
                g += m[(i, j)] * signs[j] * y[j];
            }
            grad[i] = 2.0 * signs[i] * g;
        }
        let trial: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
        let next = slice.project(&trial);
        let f_next = quad(m, signs, &next);
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        if f_next > fx {
            if momentum == 1.0 {
                // A plain gradient step from x no longer decreases f.
                break;
            }
            // Restart the momentum when the objective goes up.
            y = x.clone();
            momentum = 1.0;
            continue;
        }
        let beta = (momentum - 1.0) / next_momentum;
        let moved: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        y = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
        x = next;
        let improvement = fx - f_next;
        fx = f_next;
        momentum = next_momentum;
        if moved < 1e-12 || (improvement <= 1e-15 * fx.abs() && moved < 1e-9) {
            break;
        }
    }
    (fx, x)
}

fn descent_search(m: &DMatrix<f64>, slice: &ConeSlice, rng: &mut SimRng) -> (f64, Vec<f64>, bool) {
    let d = m.nrows();
    let lipschitz = 2.0 * SymmetricEigen::new(m.clone()).eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let uniform = vec![1.0 / d as f64; d];
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let consider = |signs: &[f64], start: &[f64], best: &mut (f64, Vec<f64>)| -> (f64, Vec<f64>) {
        let (v, w) = solve_orthant(m, slice, signs, lipschitz, start);
        if v < best.0 {
            *best = (v, w.iter().zip(signs).map(|(a, s)| a * s).collect());
        }
        (v, w)
    };
    if d <= ORTHANT_ENUMERATION_MAX_DIM {
        // Orthants come in +/- pairs with equal values; fix the first sign.
        for pattern in 0..(1usize << (d - 1)) {
            let signs: Vec<f64> =
                (0..d).map(|j| if j > 0 && pattern >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect();
            consider(&signs, &uniform, &mut best);
        }
        return (best.0, best.1, true);
    }
    for restart in 0..RESTARTS {
        let mut signs: Vec<f64> = if restart == 0 {
            vec![1.0; d]
        } else {
            (0..d).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
        };
        let (mut value, mut w) = consider(&signs, &uniform, &mut best);
        // Flip the sign of a zero coordinate when the first-order conditions
        // in the neighbouring orthant say mass should move onto it.
        for _ in 0..d {
            let Some(j) = flip_candidate(m, slice, &signs, &w) else { break };
            signs[j] = -signs[j];
            let (v, w2) = consider(&signs, &w, &mut best);
            if v < value - 1e-13 * value.abs() {
                value = v;
                w = w2;
            } else {
                signs[j] = -signs[j];
                break;
            }
        }
        // Then single flips of the active coordinates, first improvement.
        let mut improved = true;
        while improved {
            improved = false;
            for j in 0..d {
                if w[j] == 0.0 {
                    continue;
                }
                signs[j] = -signs[j];
                let (v, w2) = consider(&signs, &w, &mut best);
                if v < value - 1e-10 * value.abs() {
                    value = v;
                    w = w2;
                    improved = true;
                } else {
                    signs[j] = -signs[j];
                }
            }
        }
    }
    (best.0, best.1, false)
}

/// Zero coordinate whose flipped-sign partial derivative falls furthest
/// below the multiplier of its block, if any.
fn flip_candidate(m: &DMatrix<f64>, slice: &ConeSlice, signs: &[f64], w: &[f64]) -> Option<usize> {
    let d = w.len();
    let grad: Vec<f64> =
        (0..d).map(|i| 2.0 * signs[i] * (0..d).map(|j| m[(i, j)] * signs[j] * w[j]).sum::<f64>()).collect();
    let level = |in_s: bool| {
        (0..d).filter(|&k| slice.in_s[k] == in_s && w[k] > 0.0).map(|k| grad[k]).fold(f64::INFINITY, f64::min)
    };
    let (on, off) = (level(true), level(false));
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs())).max(f64::MIN_POSITIVE);
    let mut pick = None;
    let mut worst = -1e-9 * scale;
    for j in 0..d {
        if w[j] > 0.0 {
            continue;
        }
        let own = if slice.in_s[j] { on } else { off };
        let threshold = if own.is_finite() { own } else { on.min(off) };
        // After the flip the partial derivative changes sign.
        let gap = -grad[j] - threshold;
        if gap < worst {
            worst = gap;
            pick = Some(j);
        }
    }
    pick
}

fn dirichlet_block(rng: &mut SimRng, len: usize, mass: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|v| mass * v / total).collect()
}

/// Random points of the cone slice. Half are Dirichlet draws on random
/// faces of each block; the other half are Gaussian draws with covariance
/// `(M + eps I)^{-1}`, which favour low-curvature directions, pulled into
/// the cone by shrinking the off-support block when it is too heavy.
fn grid_search(m: &DMatrix<f64>, slice: &ConeSlice, samples: usize, rng: &mut SimRng) -> (f64, Vec<f64>) {
    let d = m.nrows();
    let on: Vec<usize> = (0..d).filter(|&j| slice.in_s[j]).collect();
    let off: Vec<usize> = (0..d).filter(|&j| !slice.in_s[j]).collect();
    let alpha = 1.0 / slice.min_on_support - 1.0;
    let ridge = 1e-10 * m.trace().abs().max(1e-300) / d as f64;
    let factor = (m + DMatrix::identity(d, d) * ridge).cholesky();
    let ones = vec![1.0; d];
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let mut delta = vec![0.0; d];
    for i in 0..samples {
        delta.iter_mut().for_each(|v| *v = 0.0);
        match (&factor, i % 2) {
            (Some(chol), 1) => {
                let g = nalgebra::DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                let z = chol.l().tr_solve_lower_triangular(&g).expect("cholesky factor is invertible");
                delta.copy_from_slice(z.as_slice());
                let mass_on: f64 = on.iter().map(|&j| delta[j].abs()).sum();
                let mass_off: f64 = off.iter().map(|&j| delta[j].abs()).sum();
                if mass_off > alpha * mass_on {
                    let shrink = alpha * mass_on / mass_off;
                    for &j in &off {
                        delta[j] *= shrink;
                    }
                }
            }
            _ => {
                let a = if off.is_empty() {
                    1.0
                } else {
                    slice.min_on_support + (1.0 - slice.min_on_support) * rng.random::<f64>()
                };
                let k_on = rng.random_range(1..=on.len());
                let chosen_on = sample_indices(rng, on.len(), k_on);
                for (i, v) in chosen_on.iter().zip(dirichlet_block(rng, k_on, a)) {
                    delta[on[i]] = v;
                }
                if !off.is_empty() && a < 1.0 {
                    let k_off = rng.random_range(1..=off.len());
                    let chosen_off = sample_indices(rng, off.len(), k_off);
                    for (i, v) in chosen_off.iter().zip(dirichlet_block(rng, k_off, 1.0 - a)) {
                        delta[off[i]] = v;
                    }
                }
                for v in delta.iter_mut() {
                    if rng.random::<bool>() {
                        *v = -*v;
                    }
                }
            }
        }
        let l1: f64 = delta.iter().map(|v| v.abs()).sum();
        if l1 == 0.0 {
            continue;
        }
        delta.iter_mut().for_each(|v| *v /= l1);
        let value = quad(m, &ones, &delta);
        if value < best.0 {
            best = (value, delta.clone());
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    /// Smallest eigenvalue of `M_hat - (1 - eta) M_ref` over `m`-sparse
    /// principal submatrices.
    pub sparse_min_eigen: f64,
    /// Coordinates where `D_jj` is below the diagonal of the difference.
    pub diagonal_violations: Vec<usize>,
    pub hypothesis_holds: bool,
    /// Minimum over sampled `x` of
    /// `x^T M_hat x - (1 - eta) x^T M_ref x + ||D^{1/2} x||_1^2 / (m - 1)`.
    pub min_slack: f64,
    pub samples: usize,
}

/// Check the transfer inequality between two Gram matrices on random
/// dense and sparse vectors, after verifying its sparse hypothesis.
pub fn transfer_bound_check(
    m_hat: &DMatrix<f64>,
    m_ref: &DMatrix<f64>,
    m: usize,
    eta: f64,
    diag: &[f64],
    samples: usize,
    seed: u64,
) -> Result<TransferReport> {
    check_symmetric(m_hat)?;
    check_symmetric(m_ref)?;
    let d = m_hat.nrows();
    if m_ref.nrows() != d || diag.len() != d {
        return Err(Error::Dimension { expected: d, got: diag.len().min(m_ref.nrows()) });
    }
    if m < 2 || m > d {
        return Err(Error::input(format!("sparsity m = {m} must lie in 2..={d}")));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::input("eta must lie in [0, 1)"));
    }
    if diag.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::input("D must be a nonnegative diagonal"));
    }
    let diff = m_hat - m_ref * (1.0 - eta);
    let sparse_min_eigen = sparse_eigen(&diff, m, EigenMode::Exact)?.phi_min;
    let diagonal_violations: Vec<usize> =
        (0..d).filter(|&j| diag[j] < diff[(j, j)] - 1e-12 * diff[(j, j)].abs()).collect();
    let hypothesis_holds = sparse_min_eigen >= -1e-12 && diagonal_violations.is_empty();

    let mut rng = seeded_rng(seed);
    let root_d: Vec<f64> = diag.iter().map(|v| v.sqrt()).collect();
    let mut min_slack = f64::INFINITY;
    let mut x = vec![0.0; d];
    for i in 0..samples {
        if i % 2 == 0 {
            x.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        } else {
            x.iter_mut().for_each(|v| *v = 0.0);
            let k = rng.random_range(1..=d);
            for j in sample_indices(&mut rng, d, k) {
                x[j] = rng.sample(StandardNormal);
            }
        }
        let v = nalgebra::DVector::from_column_slice(&x);
        let q_hat = v.dot(&(m_hat * &v));
        let q_ref = v.dot(&(m_ref * &v));
        let l1: f64 = x.iter().zip(&root_d).map(|(a, r)| (a * r).abs()).sum();
        let slack = q_hat - (1.0 - eta) * q_ref + l1 * l1 / (m - 1) as f64;
        min_slack = min_slack.min(slack);
    }
    Ok(TransferReport { sparse_min_eigen, diagonal_violations, hypothesis_holds, min_slack, samples })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginPoint {
    pub h: f64,
    pub prob: f64,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// Fitted exponent; `f64::INFINITY` when no grid point saw enough events.
    pub omega: f64,
    pub curve: Vec<MarginPoint>,
    /// Grid points used in the log-log fit.
    pub fit_points: usize,
}

/// Grid points with fewer events than this are left out of the fit.
pub const MIN_MARGIN_EVENTS: usize = 5;

/// Estimate `P(gap <= h)` by Monte Carlo, where `gap` is the difference
/// between the best and second-best mean reward, and fit the exponent of
/// `P(gap <= h) ~ h^omega`.
pub fn margin_exponent<S: ContextSource + ?Sized>(
    source: &S,
    h_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<MarginReport> {
    if samples < 1000 {
        return Err(Error::input("margin estimation needs at least 1000 samples"));
    }
    if h_grid.is_empty() || h_grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::input("h grid must be nonempty and positive"));
    }
    let beta = source.beta_star();
    let mut rng = seeded_rng(seed);
    let mut gaps = Vec::with_capacity(samples);
    for t in 0..samples {
        let ctx = source.draw(&mut rng, t + 1)?;
        if ctx.num_arms() < 2 {
            return Err(Error::input("margin needs at least two arms"));
        }
        let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for x in &ctx.vectors {
            let v = dot(x, beta);
            if v > first {
                second = first;
                first = v;
            } else if v > second {
                second = v;
            }
        }
        gaps.push(first - second);
    }
    let curve: Vec<MarginPoint> = h_grid
        .iter()
        .map(|&h| {
            let events = gaps.iter().filter(|&&g| g <= h).count();
            MarginPoint { h, prob: events as f64 / samples as f64, events }
        })
        .collect();
    let used: Vec<(f64, f64)> =
        curve.iter().filter(|p| p.events >= MIN_MARGIN_EVENTS).map(|p| (p.h.ln(), p.prob.ln())).collect();
    let omega = match used.len() {
        0 => f64::INFINITY,
        1 => return Err(Error::input("only one grid point has enough events to fit a slope")),
        _ => least_squares_slope(&used).ok_or_else(|| Error::input("h grid values must differ"))?,
    };
    Ok(MarginReport { omega, curve, fit_points: used.len() })
}

/// Slope of the least-squares line through `points`.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub rounds: Vec<usize>,
    pub l1_errors: Vec<f64>,
    /// Slope of log error against log round, when at least two logged
    /// errors are positive.
    pub slope: Option<f64>,
    /// Slope of the rate `sqrt((log d + log t) / t)`, ignoring the log factor.
    pub reference_slope: f64,
}

/// l1 distance from each logged estimate to the truth, with a log-log slope.
pub fn contraction_trace(log: &[(usize, Vec<f64>)], beta_star: &[f64]) -> Result<ContractionReport> {
    let mut rounds = Vec::with_capacity(log.len());
    let mut errors: Vec<f64> = Vec::with_capacity(log.len());
    for (t, est) in log {
        if est.len() != beta_star.len() {
            return Err(Error::Dimension { expected: beta_star.len(), got: est.len() });
        }
        rounds.push(*t);
        errors.push(est.iter().zip(beta_star).map(|(a, b)| (a - b).abs()).sum());
    }
    let pts: Vec<(f64, f64)> = rounds
        .iter()
        .zip(&errors)
        .filter(|(&t, &e)| t > 0 && e > 0.0)
        .map(|(&t, &e)| ((t as f64).ln(), e.ln()))
        .collect();
    let slope = if pts.len() >= 2 { least_squares_slope(&pts) } else { None };
    Ok(ContractionReport { rounds, l1_errors: errors, slope, reference_slope: -0.5 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ContextSet;

    fn random_psd(d: usize, rng: &mut SimRng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d + 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        &a * a.transpose() / (d + 2) as f64
    }

    #[test]
    fn identity_and_diagonal() {
        for s in 1..=4 {
            let r = sparse_eigen(&DMatrix::identity(4, 4), s, EigenMode::Exact).unwrap();
            assert!((r.phi_min - 1.0).abs() < 1e-14 && (r.phi_max - 1.0).abs() < 1e-14);
        }
        let r = sparse_eigen(&DMatrix::from_diagonal(&nalgebra::dvector![4.0, 1.0]), 1, EigenMode::Exact).unwrap();
        assert_eq!((r.phi_min, r.phi_max), (1.0, 4.0));
    }

    #[test]
    fn combinations_are_all_visited() {
        let mut idx = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut idx, 8) {
            count += 1;
        }
        assert_eq!(count, 28);
        assert_eq!(binomial(8, 2), 28);
        assert_eq!(binomial(1000, 3), 166_167_000);
    }

    #[test]
    fn full_sparsity_gives_spectrum_ends() {
        let mut rng = seeded_rng(4);
        let m = random_psd(7, &mut rng);
        let eig = SymmetricEigen::new(m.clone()).eigenvalues;
        let r = sparse_eigen(&m, 7, EigenMode::Exact).unwrap();
        assert!((r.phi_min - eig.min()).abs() < 1e-10);
        assert!((r.phi_max - eig.max()).abs() < 1e-10);
    }

    #[test]
    fn exact_is_monotone_in_s_and_brackets_greedy() {
        let mut rng = seeded_rng(5);
        let m = random_psd(9, &mut rng);
        let mut prev = (f64::INFINITY, f64::NEG_INFINITY);
        for s in 1..=9 {
            let r = sparse_eigen(&m, s, EigenMode::Exact).unwrap();
            assert!(r.phi_min <= prev.0 + 1e-12 && r.phi_max >= prev.1 - 1e-12);
            prev = (r.phi_min, r.phi_max);
            let g = sparse_eigen(&m, s, EigenMode::Greedy).unwrap();
            assert!(!g.certified);
            assert!(g.phi_min >= r.phi_min - 1e-12 && g.phi_max <= r.phi_max + 1e-12);
        }
    }

    #[test]
    fn exact_refuses_over_budget() {
        let m = DMatrix::identity(200, 200);
        assert!(matches!(sparse_eigen(&m, 5, EigenMode::Exact), Err(Error::Budget { .. })));
        assert!(sparse_eigen(&m, 5, EigenMode::Greedy).is_ok());
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(sparse_eigen(&m, 1, EigenMode::Exact).is_err());
    }

    #[test]
    fn simplex_projection_properties() {
        let w = project_simplex(&[0.3, 2.0, -1.0], 1.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
        let w = project_simplex(&[0.5, 0.5], 0.25);
        assert_eq!(w, vec![0.125, 0.125]);
    }

    /// Minimum of `a^2/k + (1-a)^2/(d-k)` over the allowed on-support mass,
    /// times `k`.
    fn identity_closed_form(d: usize, k: usize, alpha: f64) -> f64 {
        let kf = k as f64;
        if k == d {
            return 1.0;
        }
        let a = (kf / d as f64).max(1.0 / (1.0 + alpha));
        kf * (a * a / kf + (1.0 - a).powi(2) / (d - k) as f64)
    }

    #[test]
    fn identity_matches_allocation_optimum() {
        let r = compatibility(&DMatrix::identity(4, 4), &[0], 7.0, CompatibilityMethod::ProjectedDescent, 1).unwrap();
        assert!((r.value - 0.25).abs() < 1e-9, "{}", r.value);
        assert!(r.certified);
        for d in [3usize, 5, 8, 12] {
            for k in 1..=3.min(d) {
                for alpha in [0.5, 1.0, 7.0] {
                    let support: Vec<usize> = (0..k).collect();
                    let r = compatibility(
                        &DMatrix::identity(d, d),
                        &support,
                        alpha,
                        CompatibilityMethod::ProjectedDescent,
                        2,
                    )
                    .unwrap();
                    let exact = identity_closed_form(d, k, alpha);
                    assert!((r.value - exact).abs() < 1e-3, "d={d} k={k} alpha={alpha}: {} vs {exact}", r.value);
                }
            }
        }
    }

    #[test]
    fn on_support_only_cone_limit() {
        let r =
            compatibility(&DMatrix::identity(5, 5), &[1, 3], 1e-9, CompatibilityMethod::ProjectedDescent, 3).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn homogeneity() {
        let mut rng = seeded_rng(6);
        for d in [5usize, 9] {
            let m = random_psd(d, &mut rng);
            let a = compatibility(&m, &[0, 2], 3.0, CompatibilityMethod::ProjectedDescent, 7).unwrap();
            let b = compatibility(&(&m * 3.0), &[0, 2], 3.0, CompatibilityMethod::ProjectedDescent, 7).unwrap();
            assert!((b.value - 3.0 * a.value).abs() < 1e-9 * b.value.max(1.0));
        }
    }

    #[test]
    fn grid_bounds_descent_from_above() {
        let mut rng = seeded_rng(8);
        let m = random_psd(6, &mut rng);
        let descent = compatibility(&m, &[1], 7.0, CompatibilityMethod::ProjectedDescent, 1).unwrap();
        let grid = compatibility(&m, &[1], 7.0, CompatibilityMethod::VertexGrid { samples: 1_000_000 }, 1).unwrap();
        assert!(grid.value >= descent.value - 1e-9);
        assert!(grid.value <= 1.05 * descent.value + 1e-12, "{} vs {}", grid.value, descent.value);
        // The minimiser lies in the cone and on the slice.
        let on = descent.argmin[1].abs();
        let total: f64 = descent.argmin.iter().map(|v| v.abs()).sum();
        assert!((total - 1.0).abs() < 1e-9 && total - on <= 7.0 * on + 1e-9);
    }

    #[test]
    fn empty_support_rejected() {
        assert!(compatibility(&DMatrix::identity(3, 3), &[], 7.0, CompatibilityMethod::ProjectedDescent, 0).is_err());
    }

    #[test]
    fn transfer_equal_matrices_pass() {
        let mut rng = seeded_rng(9);
        let m = random_psd(6, &mut rng);
        let r = transfer_bound_check(&m, &m, 3, 0.0, &[0.0; 6], 2000, 1).unwrap();
        assert!(r.hypothesis_holds);
        assert!(r.min_slack >= -1e-10);
    }

    #[test]
    fn transfer_detects_small_diagonal() {
        let m_ref = DMatrix::identity(4, 4);
        let m_hat = &m_ref * 2.0;
        let r = transfer_bound_check(&m_hat, &m_ref, 2, 0.0, &[0.5, 1.0, 1.0, 1.0], 100, 1).unwrap();
        assert!(!r.hypothesis_holds);
        assert_eq!(r.diagonal_violations, vec![0]);
    }

    struct UniformGap;

    impl ContextSource for UniformGap {
        fn beta_star(&self) -> &[f64] {
            &[1.0]
        }
        fn draw(&self, rng: &mut SimRng, t: usize) -> Result<ContextSet> {
            Ok(ContextSet { round: t, vectors: vec![vec![0.0], vec![rng.random_range(-1.0..1.0)]], labels: None })
        }
    }

    struct FixedGap(f64);

    impl ContextSource for FixedGap {
        fn beta_star(&self) -> &[f64] {
            &[1.0]
        }
        fn draw(&self, _rng: &mut SimRng, t: usize) -> Result<ContextSet> {
            Ok(ContextSet { round: t, vectors: vec![vec![0.0], vec![self.0]], labels: None })
        }
    }

    #[test]
    fn margin_cases() {
        let grid = [0.05, 0.1, 0.2, 0.4, 0.8];
        let r = margin_exponent(&UniformGap, &grid, 100_000, 1).unwrap();
        assert!((r.omega - 1.0).abs() < 0.1, "{}", r.omega);
        let r = margin_exponent(&FixedGap(2.0), &grid, 1000, 1).unwrap();
        assert!(r.omega.is_infinite() && r.fit_points == 0);
        let r = margin_exponent(&FixedGap(0.0), &grid, 1000, 1).unwrap();
        assert!(r.omega.abs() < 1e-12);
    }

    #[test]
    fn contraction_slope_of_power_law() {
        let log: Vec<(usize, Vec<f64>)> =
            (1..=10).map(|i| (10 * i, vec![1.0 + (10.0 * i as f64).powf(-0.5), 0.0])).collect();
        let r = contraction_trace(&log, &[1.0, 0.0]).unwrap();
        assert!((r.slope.unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(r.rounds.len(), 10);
    }
}
