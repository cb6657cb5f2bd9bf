//! Reference implementation built on an explicit inverse of `J`.
//!
//! It shares no code with the factorized solver: the inverse comes from
//! Gauss-Jordan elimination, the multipliers from Cramer's rule on the 2×2
//! stationarity system, and the risk from the quadratic form itself. It is
//! `O(N³)` with a large constant and is meant for small markets.

use nalgebra::{DMatrix, DVector};

use crate::market::AssetEnsemble;
use crate::quenched::ConstraintSpec;

/// Gauss-Jordan inverse with partial pivoting. `None` for a singular matrix.
pub fn explicit_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return None;
    }
    let mut m = a.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&x, &y| m[(x, col)].abs().total_cmp(&m[(y, col)].abs()))?;
        let pivot = m[(pivot_row, col)];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        m.swap_rows(col, pivot_row);
        inv.swap_rows(col, pivot_row);
        for j in 0..n {
            m[(col, j)] /= pivot;
            inv[(col, j)] /= pivot;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[(row, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..n {
                m[(row, j)] -= f * m[(col, j)];
                inv[(row, j)] -= f * inv[(col, j)];
            }
        }
    }
    Some(inv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
    pub k: f64,
    pub theta: f64,
    pub weights: DVector<f64>,
    pub eps: f64,
}

/// Optimal portfolio through `J⁻¹` formed explicitly.
pub fn explicit_pipeline(
    j: &DMatrix<f64>,
    ensemble: &AssetEnsemble,
    c: &ConstraintSpec,
) -> Option<OracleSolution> {
    let inv = explicit_inverse(j)?;
    let dim = ensemble.risky_count();
    let n = ensemble.n() as f64;
    let e = DVector::from_element(dim, 1.0);
    let r = DVector::from_column_slice(ensemble.returns());
    let g0 = (e.transpose() * &inv * &e)[0] / n;
    let g1 = (r.transpose() * &inv * &e)[0] / n;
    let g2 = (r.transpose() * &inv * &r)[0] / n;
    let (b1, b2) = (1.0 - c.rho, c.r - c.rho * c.r0);
    let det = g0 * g2 - g1 * g1;
    if det == 0.0 {
        return None;
    }
    let k = (b1 * g2 - g1 * b2) / det;
    let theta = (g0 * b2 - g1 * b1) / det;
    let weights = &inv * (&e * k + &r * theta);
    let eps = 0.5 * (weights.transpose() * j * &weights)[0] / (n - 1.0);
    Some(OracleSolution {
        g0,
        g1,
        g2,
        k,
        theta,
        weights,
        eps,
    })
}
