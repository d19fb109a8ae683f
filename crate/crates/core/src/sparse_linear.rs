//! Lasso, ridge and logistic-lasso solvers.
//!
//! The lasso minimises `(1/2n)||y - X b||^2 + lambda ||b||_1` by cyclic
//! coordinate descent with soft-thresholding. The same weighted kernel,
//! wrapped in iteratively reweighted least squares, fits the l1-penalised
//! logistic regression used to build reference parameters from labelled data.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{check_finite, dot, ColumnDesign};
use crate::{Error, Result};

/// Default stopping tolerance on the KKT residual.
pub const KKT_TOLERANCE: f64 = 1e-6;

/// A penalised least-squares problem over a column-major design.
#[derive(Debug, Clone, Copy)]
pub struct RegressionProblem<'a> {
    pub design: &'a ColumnDesign,
    pub response: &'a [f64],
    pub penalty: f64,
}

impl<'a> RegressionProblem<'a> {
    pub fn new(design: &'a ColumnDesign, response: &'a [f64], penalty: f64) -> Result<Self> {
        if response.len() != design.rows() {
            return Err(Error::Dimension { expected: design.rows(), got: response.len() });
        }
        Ok(RegressionProblem { design, response, penalty })
    }

    fn validate(&self) -> Result<()> {
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return Err(Error::config("penalty must be finite and non-negative"));
        }
        check_finite(self.response, "response")?;
        for (j, col) in self.design.columns().iter().enumerate() {
            check_finite(col, &format!("design column {j}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution {
    pub coefficients: Vec<f64>,
    pub kkt_residual: f64,
    /// Number of full sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each sweep.
    pub objective_trace: Vec<f64>,
}

pub fn soft_threshold(z: f64, threshold: f64) -> f64 {
    if z > threshold {
        z - threshold
    } else if z < -threshold {
        z + threshold
    } else {
        0.0
    }
}

/// `(1/2n)||y - X b||^2 + lambda ||b||_1`
pub fn lasso_objective(problem: &RegressionProblem<'_>, beta: &[f64]) -> f64 {
    let n = problem.design.rows().max(1) as f64;
    let fitted = problem.design.matvec(beta);
    let rss: f64 = problem.response.iter().zip(&fitted).map(|(y, f)| (y - f).powi(2)).sum();
    rss / (2.0 * n) + problem.penalty * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Largest violation of the lasso optimality conditions at `beta`.
pub fn kkt_residual(problem: &RegressionProblem<'_>, beta: &[f64]) -> f64 {
    let n = problem.design.rows().max(1) as f64;
    let fitted = problem.design.matvec(beta);
    let resid: Vec<f64> = problem.response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let lambda = problem.penalty;
    problem
        .design
        .columns()
        .iter()
        .zip(beta)
        .map(|(col, &b)| {
            let g = dot(col, &resid) / n;
            if b != 0.0 {
                (g - lambda * b.signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Cold-start lasso fit.
pub fn lasso_fit(problem: &RegressionProblem<'_>, tol: f64, max_sweeps: usize) -> Result<LassoSolution> {
    let init = vec![0.0; problem.design.dim()];
    lasso_fit_warm(problem, tol, max_sweeps, &init)
}

/// Lasso fit started from `init`. Stops once the largest coefficient change
/// in a sweep drops below `tol` or after `max_sweeps` sweeps.
pub fn lasso_fit_warm(
    problem: &RegressionProblem<'_>,
    tol: f64,
    max_sweeps: usize,
    init: &[f64],
) -> Result<LassoSolution> {
    problem.validate()?;
    if !(tol > 0.0) {
        return Err(Error::config("tol must be positive"));
    }
    let d = problem.design.dim();
    if init.len() != d {
        return Err(Error::Dimension { expected: d, got: init.len() });
    }
    check_finite(init, "warm start")?;

    let mut beta = init.to_vec();
    if problem.design.rows() == 0 {
        beta.iter_mut().for_each(|b| *b = 0.0);
        return Ok(LassoSolution {
            coefficients: beta,
            kkt_residual: 0.0,
            iterations: 0,
            converged: true,
            objective_trace: vec![0.0],
        });
    }
    let kernel = CdKernel::new(problem.design.columns(), problem.response, None);
    let mut residual = kernel.residual(&beta, 0.0);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let change = kernel.sweep(problem.penalty, &mut beta, &mut residual, None);
        sweeps += 1;
        trace.push(objective_from_residual(&residual, problem.penalty, &beta));
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(LassoSolution {
        kkt_residual: kkt_residual(problem, &beta),
        coefficients: beta,
        iterations: sweeps,
        converged,
        objective_trace: trace,
    })
}

fn objective_from_residual(residual: &[f64], penalty: f64, beta: &[f64]) -> f64 {
    let n = residual.len().max(1) as f64;
    residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * n) + penalty * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Penalty level `sigma * x_max * sqrt(2 (log d + log t) / t)` used by the
/// lasso-based policies and the VB initialisation.
pub fn default_lasso_penalty(sigma: f64, x_max: f64, dim: usize, t: usize) -> f64 {
    let t = t.max(1) as f64;
    let d = dim.max(1) as f64;
    sigma * x_max * (2.0 * (d.ln() + t.ln()) / t).sqrt()
}

/// Weighted coordinate descent over a fixed set of columns.
struct CdKernel<'a> {
    columns: &'a [Vec<f64>],
    target: &'a [f64],
    weights: Option<&'a [f64]>,
    n: f64,
    /// `(1/n) sum_i w_i x_ij^2`
    col_scale: Vec<f64>,
}

impl<'a> CdKernel<'a> {
    fn new(columns: &'a [Vec<f64>], target: &'a [f64], weights: Option<&'a [f64]>) -> Self {
        let n = target.len().max(1) as f64;
        let col_scale = columns
            .iter()
            .map(|c| match weights {
                Some(w) => c.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>() / n,
                None => c.iter().map(|x| x * x).sum::<f64>() / n,
            })
            .collect();
        CdKernel { columns, target, weights, n, col_scale }
    }

    fn residual(&self, beta: &[f64], intercept: f64) -> Vec<f64> {
        let mut r: Vec<f64> = self.target.iter().map(|z| z - intercept).collect();
        for (col, &b) in self.columns.iter().zip(beta) {
            if b != 0.0 {
                crate::linalg::axpy(-b, col, &mut r);
            }
        }
        r
    }

    fn weighted_dot(&self, col: &[f64], r: &[f64]) -> f64 {
        match self.weights {
            Some(w) => col.iter().zip(r).zip(w).map(|((x, r), w)| w * x * r).sum(),
            None => dot(col, r),
        }
    }

    fn update(&self, j: usize, penalty: f64, beta: &mut [f64], residual: &mut [f64]) -> f64 {
        let scale = self.col_scale[j];
        let old = beta[j];
        let new = if scale > 0.0 {
            let rho = self.weighted_dot(&self.columns[j], residual) / self.n + scale * old;
            soft_threshold(rho, penalty) / scale
        } else {
            0.0
        };
        if new != old {
            crate::linalg::axpy(old - new, &self.columns[j], residual);
            beta[j] = new;
        }
        (new - old).abs()
    }

    fn update_intercept(&self, intercept: &mut f64, residual: &mut [f64]) -> f64 {
        let (num, den) = match self.weights {
            Some(w) => residual.iter().zip(w).fold((0.0, 0.0), |(a, b), (r, w)| (a + w * r, b + w)),
            None => (residual.iter().sum(), residual.len() as f64),
        };
        if den <= 0.0 {
            return 0.0;
        }
        let delta = num / den;
        *intercept += delta;
        residual.iter_mut().for_each(|r| *r -= delta);
        delta.abs()
    }

    /// One cyclic pass; returns the largest coefficient change.
    fn sweep(&self, penalty: f64, beta: &mut [f64], residual: &mut [f64], intercept: Option<&mut f64>) -> f64 {
        let mut change: f64 = 0.0;
        if let Some(b0) = intercept {
            change = change.max(self.update_intercept(b0, residual));
        }
        for j in 0..beta.len() {
            change = change.max(self.update(j, penalty, beta, residual));
        }
        change
    }

    /// Full sweeps interleaved with passes over the current support only.
    fn solve_active(&self, penalty: f64, beta: &mut [f64], intercept: &mut f64, tol: f64, max_sweeps: usize) -> bool {
        let mut residual = self.residual(beta, *intercept);
        let mut sweeps = 0;
        while sweeps < max_sweeps {
            let change = self.sweep(penalty, beta, &mut residual, Some(intercept));
            sweeps += 1;
            if change < tol {
                return true;
            }
            let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
            while sweeps < max_sweeps {
                let mut inner = self.update_intercept(intercept, &mut residual);
                for &j in &active {
                    inner = inner.max(self.update(j, penalty, beta, &mut residual));
                }
                sweeps += 1;
                if inner < tol {
                    break;
                }
            }
        }
        false
    }
}

/// Ridge estimate `(X^T X + n lambda I)^{-1} X^T y` via Cholesky.
pub fn ridge_fit(problem: &RegressionProblem<'_>) -> Result<Vec<f64>> {
    problem.validate()?;
    if !(problem.penalty > 0.0) {
        return Err(Error::config("ridge penalty must be positive"));
    }
    let d = problem.design.dim();
    let n = problem.design.rows() as f64;
    let cols = problem.design.columns();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let v = dot(&cols[i], &cols[j]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        gram[(i, i)] += n.max(1.0) * problem.penalty;
    }
    let rhs = DVector::from_iterator(d, cols.iter().map(|c| dot(c, problem.response)));
    let chol = gram.cholesky().ok_or_else(|| Error::input("ridge normal equations are not positive definite"))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Fitted l1-penalised logistic regression on the original feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticLassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub penalty: f64,
    /// `-2 * log-likelihood` on the fitting data.
    pub deviance: f64,
    pub converged: bool,
}

impl LogisticLassoFit {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.intercept + dot(row, &self.coefficients))
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn binomial_deviance(labels: &[f64], eta: &[f64]) -> f64 {
    // -2 sum [y eta - log(1 + e^eta)], evaluated stably
    -2.0 * labels.iter().zip(eta).map(|(y, e)| y * e - (e.max(0.0) + (-e.abs()).exp().ln_1p())).sum::<f64>()
}

/// Columns centred and scaled to unit variance; constant columns become zero.
struct Standardized {
    columns: Vec<Vec<f64>>,
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Standardized {
    fn new(design: &ColumnDesign) -> Self {
        let n = design.rows().max(1) as f64;
        let mut columns = Vec::with_capacity(design.dim());
        let mut means = Vec::with_capacity(design.dim());
        let mut scales = Vec::with_capacity(design.dim());
        for col in design.columns() {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 {
                columns.push(col.iter().map(|x| (x - mean) / sd).collect());
                scales.push(sd);
            } else {
                columns.push(vec![0.0; col.len()]);
                scales.push(0.0);
            }
            means.push(mean);
        }
        Standardized { columns, means, scales }
    }

    fn subset(&self, rows: &[usize]) -> Vec<Vec<f64>> {
        self.columns.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect()
    }

    fn to_original(&self, beta: &[f64], intercept: f64) -> (Vec<f64>, f64) {
        let mut b0 = intercept;
        let coef = beta
            .iter()
            .zip(&self.scales)
            .zip(&self.means)
            .map(|((b, s), m)| {
                if *s > 0.0 && *b != 0.0 {
                    let c = b / s;
                    b0 -= c * m;
                    c
                } else {
                    0.0
                }
            })
            .collect();
        (coef, b0)
    }
}

struct LogisticState {
    beta: Vec<f64>,
    intercept: f64,
    converged: bool,
}

/// Proximal-Newton (IRLS) fit of `-(1/n) loglik + lambda ||b||_1` on
/// standardised columns, warm-started from `state`.
fn irls_fit(columns: &[Vec<f64>], labels: &[f64], penalty: f64, state: &mut LogisticState, max_iter: usize) {
    let n = labels.len();
    let eta_of = |beta: &[f64], b0: f64| -> Vec<f64> {
        let mut eta = vec![b0; n];
        for (c, &b) in columns.iter().zip(beta) {
            if b != 0.0 {
                crate::linalg::axpy(b, c, &mut eta);
            }
        }
        eta
    };
    let objective = |beta: &[f64], eta: &[f64]| {
        binomial_deviance(labels, eta) / (2.0 * n as f64) + penalty * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    let mut eta = eta_of(&state.beta, state.intercept);
    let mut obj = objective(&state.beta, &eta);
    state.converged = false;
    for _ in 0..max_iter {
        let mut w = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for (y, e) in labels.iter().zip(&eta) {
            let p = sigmoid(*e);
            let wi = (p * (1.0 - p)).max(1e-5);
            w.push(wi);
            z.push(e + (y - p) / wi);
        }
        let kernel = CdKernel::new(columns, &z, Some(&w));
        let mut beta = state.beta.clone();
        let mut b0 = state.intercept;
        kernel.solve_active(penalty, &mut beta, &mut b0, 1e-7, 2000);

        // Step halving keeps the penalised objective monotone.
        let mut step = 1.0;
        let (mut cand_beta, mut cand_b0, mut cand_eta, mut cand_obj);
        loop {
            cand_beta = state.beta.iter().zip(&beta).map(|(o, n)| o + step * (n - o)).collect::<Vec<_>>();
            cand_b0 = state.intercept + step * (b0 - state.intercept);
            cand_eta = eta_of(&cand_beta, cand_b0);
            cand_obj = objective(&cand_beta, &cand_eta);
            if cand_obj <= obj + 1e-12 || step < 1e-4 {
                break;
            }
            step *= 0.5;
        }
        let rel = (obj - cand_obj).abs() / obj.abs().max(1e-10);
        state.beta = cand_beta;
        state.intercept = cand_b0;
        eta = cand_eta;
        obj = cand_obj;
        if rel < 1e-8 {
            state.converged = true;
            break;
        }
    }
}

fn validate_logistic(design: &ColumnDesign, labels: &[f64]) -> Result<()> {
    if labels.len() != design.rows() {
        return Err(Error::Dimension { expected: design.rows(), got: labels.len() });
    }
    if let Some(i) = labels.iter().position(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::input(format!("label at row {i} is not 0/1")));
    }
    for (j, col) in design.columns().iter().enumerate() {
        check_finite(col, &format!("design column {j}"))?;
    }
    Ok(())
}

/// Logistic lasso at a fixed penalty (on the standardised scale).
pub fn logistic_lasso_fit(design: &ColumnDesign, labels: &[f64], penalty: f64) -> Result<LogisticLassoFit> {
    validate_logistic(design, labels)?;
    let std = Standardized::new(design);
    let mut state = LogisticState { beta: vec![0.0; design.dim()], intercept: 0.0, converged: false };
    irls_fit(&std.columns, labels, penalty, &mut state, 100);
    let (coefficients, intercept) = std.to_original(&state.beta, state.intercept);
    let eta: Vec<f64> = (0..design.rows())
        .map(|i| intercept + design.columns().iter().zip(&coefficients).map(|(c, b)| c[i] * b).sum::<f64>())
        .collect();
    Ok(LogisticLassoFit {
        deviance: binomial_deviance(labels, &eta),
        coefficients,
        intercept,
        penalty,
        converged: state.converged,
    })
}

/// Logistic lasso with the penalty chosen by stratified `folds`-fold
/// cross-validation over a log-spaced path of `path_len` values.
pub fn logistic_lasso_cv(
    design: &ColumnDesign,
    labels: &[f64],
    folds: usize,
    path_len: usize,
) -> Result<LogisticLassoFit> {
    validate_logistic(design, labels)?;
    if folds < 2 || path_len == 0 {
        return Err(Error::config("need at least 2 folds and one penalty value"));
    }
    let n = labels.len();
    let std = Standardized::new(design);
    let ybar = labels.iter().sum::<f64>() / n as f64;
    let lambda_max = std
        .columns
        .iter()
        .map(|c| c.iter().zip(labels).map(|(x, y)| x * (y - ybar)).sum::<f64>().abs() / n as f64)
        .fold(0.0, f64::max);
    if lambda_max == 0.0 {
        return logistic_lasso_fit(design, labels, 1.0);
    }
    let ratio: f64 = if n < design.dim() { 0.02 } else { 1e-3 };
    let path: Vec<f64> =
        (0..path_len).map(|k| lambda_max * ratio.powf(k as f64 / (path_len.max(2) - 1) as f64)).collect();

    // Stratified round-robin fold assignment.
    let mut fold_of = vec![0; n];
    for class in [0.0, 1.0] {
        for (k, i) in (0..n).filter(|&i| labels[i] == class).enumerate() {
            fold_of[i] = k % folds;
        }
    }
    let mut cv_dev = vec![0.0; path.len()];
    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == fold).collect();
        if test.is_empty() || train.is_empty() {
            continue;
        }
        let train_cols = std.subset(&train);
        let test_cols = std.subset(&test);
        let train_y: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let test_y: Vec<f64> = test.iter().map(|&i| labels[i]).collect();
        let mut state = LogisticState { beta: vec![0.0; design.dim()], intercept: 0.0, converged: false };
        for (k, &lambda) in path.iter().enumerate() {
            irls_fit(&train_cols, &train_y, lambda, &mut state, 50);
            let eta: Vec<f64> = (0..test.len())
                .map(|i| {
                    state.intercept
                        + test_cols
                            .iter()
                            .zip(&state.beta)
                            .filter(|(_, b)| **b != 0.0)
                            .map(|(c, b)| c[i] * b)
                            .sum::<f64>()
                })
                .collect();
            cv_dev[k] += binomial_deviance(&test_y, &eta);
        }
    }
    let best = crate::linalg::argmax(cv_dev.iter().map(|d| -d));

    let mut state = LogisticState { beta: vec![0.0; design.dim()], intercept: 0.0, converged: false };
    for &lambda in &path[..=best] {
        irls_fit(&std.columns, labels, lambda, &mut state, 100);
    }
    let (coefficients, intercept) = std.to_original(&state.beta, state.intercept);
    let eta: Vec<f64> = (0..n)
        .map(|i| {
            intercept
                + design
                    .columns()
                    .iter()
                    .zip(&coefficients)
                    .filter(|(_, b)| **b != 0.0)
                    .map(|(c, b)| c[i] * b)
                    .sum::<f64>()
        })
        .collect();
    Ok(LogisticLassoFit {
        deviance: binomial_deviance(labels, &eta),
        coefficients,
        intercept,
        penalty: path[best],
        converged: state.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_design(n: usize, d: usize, seed: u64) -> (ColumnDesign, Vec<f64>) {
        let mut rng = seeded_rng(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        (ColumnDesign::from_rows(&rows, d).unwrap(), y)
    }

    #[test]
    fn unpenalized_square_system_is_solved_exactly() {
        let rows = vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]];
        let x = ColumnDesign::from_rows(&rows, 3).unwrap();
        let truth = [1.0, -2.0, 0.5];
        let y = x.matvec(&truth);
        let p = RegressionProblem::new(&x, &y, 0.0).unwrap();
        let sol = lasso_fit(&p, 1e-14, 100_000).unwrap();
        assert!(sol.converged);
        for (a, b) in sol.coefficients.iter().zip(truth) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn full_shrinkage_gives_exact_zero() {
        let (x, y) = random_design(30, 8, 1);
        let n = 30.0;
        let lam_max = x.columns().iter().map(|c| dot(c, &y).abs() / n).fold(0.0, f64::max);
        let p = RegressionProblem::new(&x, &y, lam_max).unwrap();
        let sol = lasso_fit(&p, 1e-10, 1000).unwrap();
        assert!(sol.coefficients.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn orthonormal_design_matches_soft_threshold() {
        // Columns of a scaled Hadamard matrix: X^T X = n I.
        let h = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
        let rows: Vec<Vec<f64>> = h.iter().map(|r| r.to_vec()).collect();
        let x = ColumnDesign::from_rows(&rows, 4).unwrap();
        let y = vec![3.0, -1.0, 0.5, 2.0];
        let lambda = 0.4;
        let p = RegressionProblem::new(&x, &y, lambda).unwrap();
        let sol = lasso_fit(&p, 1e-14, 1000).unwrap();
        for j in 0..4 {
            let z = dot(x.column(j), &y) / 4.0;
            assert!((sol.coefficients[j] - soft_threshold(z, lambda)).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_never_increases_across_sweeps() {
        let (x, y) = random_design(40, 60, 2);
        let p = RegressionProblem::new(&x, &y, 0.05).unwrap();
        let sol = lasso_fit(&p, 1e-12, 5000).unwrap();
        for w in sol.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn kkt_holds_on_random_problems() {
        for seed in 0..20 {
            let (x, y) = random_design(25, 40, 100 + seed);
            let p = RegressionProblem::new(&x, &y, 0.1).unwrap();
            let sol = lasso_fit(&p, 1e-10, 100_000).unwrap();
            assert!(sol.converged);
            assert!(sol.kkt_residual <= KKT_TOLERANCE, "seed {seed}: {}", sol.kkt_residual);
        }
    }

    #[test]
    fn warm_start_reaches_the_same_optimum() {
        let (x, y) = random_design(50, 10, 3);
        let p = RegressionProblem::new(&x, &y, 0.05).unwrap();
        let cold = lasso_fit(&p, 1e-12, 10_000).unwrap();
        let warm = lasso_fit_warm(&p, 1e-12, 10_000, &[1.0; 10]).unwrap();
        for (a, b) in cold.coefficients.iter().zip(&warm.coefficients) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let rows = vec![vec![1.0, f64::NAN]];
        let x = ColumnDesign::from_rows(&rows, 2).unwrap();
        let p = RegressionProblem::new(&x, &[1.0], 0.1).unwrap();
        assert!(matches!(lasso_fit(&p, 1e-6, 10), Err(Error::Input(_))));
    }

    #[test]
    fn ridge_diagonal_shrinkage() {
        let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| f64::from(u8::from(i == j))).collect()).collect();
        let x = ColumnDesign::from_rows(&rows, 3).unwrap();
        let y = vec![1.0, -2.0, 3.0];
        let mut prev = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            let p = RegressionProblem::new(&x, &y, lambda).unwrap();
            let b = ridge_fit(&p).unwrap();
            for (bi, yi) in b.iter().zip(&y) {
                assert!((bi - yi / (1.0 + 3.0 * lambda)).abs() < 1e-12);
            }
            let norm: f64 = b.iter().map(|v| v.abs()).sum();
            assert!(norm < prev);
            prev = norm;
        }
    }

    #[test]
    fn ridge_satisfies_normal_equations() {
        let (x, y) = random_design(10, 3, 4);
        let lambda = 0.3;
        let p = RegressionProblem::new(&x, &y, lambda).unwrap();
        let b = ridge_fit(&p).unwrap();
        let resid: Vec<f64> = y.iter().zip(x.matvec(&b)).map(|(y, f)| y - f).collect();
        for j in 0..3 {
            let eq = dot(x.column(j), &resid) - 10.0 * lambda * b[j];
            assert!(eq.abs() < 1e-10);
        }
    }

    #[test]
    fn ridge_of_zero_response_is_zero_and_needs_positive_penalty() {
        let (x, _) = random_design(5, 3, 5);
        let y = vec![0.0; 5];
        let b = ridge_fit(&RegressionProblem::new(&x, &y, 1.0).unwrap()).unwrap();
        assert!(b.iter().all(|v| *v == 0.0));
        assert!(ridge_fit(&RegressionProblem::new(&x, &y, 0.0).unwrap()).is_err());
    }

    #[test]
    fn logistic_lasso_zero_column_stays_zero() {
        let mut rng = seeded_rng(6);
        let rows: Vec<Vec<f64>> =
            (0..60).map(|_| vec![rng.sample(StandardNormal), 0.0, rng.sample(StandardNormal)]).collect();
        let labels: Vec<f64> =
            rows.iter().map(|r| if r[0] + 0.3 * rng.random::<f64>() > 0.0 { 1.0 } else { 0.0 }).collect();
        let x = ColumnDesign::from_rows(&rows, 3).unwrap();
        let fit = logistic_lasso_cv(&x, &labels, 5, 10).unwrap();
        assert_eq!(fit.coefficients[1], 0.0);
        assert!(fit.coefficients[0] > 0.0);
    }

    #[test]
    fn logistic_rejects_non_binary_labels() {
        let x = ColumnDesign::from_rows(&[vec![1.0], vec![2.0]], 1).unwrap();
        assert!(logistic_lasso_fit(&x, &[0.0, 2.0], 0.1).is_err());
    }
}
