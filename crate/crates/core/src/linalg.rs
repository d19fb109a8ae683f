//! Small dense helpers shared across modules.

use crate::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Index of the largest score; ties go to the lowest index and NaN never wins.
pub fn argmax(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut found = false;
    for (i, s) in scores.into_iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if !found || s > best_val {
            best = i;
            best_val = s;
            found = true;
        }
    }
    best
}

pub fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::input(format!("{what}: non-finite value at index {i}"))),
        None => Ok(()),
    }
}

/// Column-major design matrix that grows one row at a time.
///
/// Coordinate-wise solvers only ever touch whole columns, so columns are
/// stored as separate vectors.
#[derive(Debug, Clone, Default)]
pub struct ColumnDesign {
    columns: Vec<Vec<f64>>,
    rows: usize,
}

impl ColumnDesign {
    pub fn new(dim: usize) -> Self {
        ColumnDesign { columns: vec![Vec::new(); dim], rows: 0 }
    }

    pub fn from_rows(rows: &[Vec<f64>], dim: usize) -> Result<Self> {
        let mut design = ColumnDesign::new(dim);
        for row in rows {
            design.push_row(row)?;
        }
        Ok(design)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension { expected: self.columns.len(), got: row.len() });
        }
        for (col, &v) in self.columns.iter_mut().zip(row) {
            col.push(v);
        }
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn matvec(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (col, &b) in self.columns.iter().zip(beta) {
            if b != 0.0 {
                axpy(b, col, &mut out);
            }
        }
        out
    }
}
