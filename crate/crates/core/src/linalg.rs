//! Dense matrix helpers: spectral norm by power iteration, Frobenius norm,
//! double centering.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, DipsError, Result};
use crate::numeric::ksum;

pub type Matrix = DMatrix<f64>;

/// Default relative tolerance for [`operator_norm`].
pub const OPNORM_TOL: f64 = 1e-10;
/// Iteration cap for the power method.
pub const OPNORM_MAX_ITER: usize = 10_000;

const RESTART_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// Result of a power-iteration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpNorm {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarted: bool,
}

/// Largest singular value of `m` by power iteration on `MᵀM`.
///
/// Starts from the all-ones vector. If the iterate collapses (the start lies
/// in, or numerically near, the null space of `M`) or the run does not
/// converge within [`OPNORM_MAX_ITER`] iterations, one restart from a fixed
/// pseudo-random vector is attempted and the larger estimate is kept.
pub fn operator_norm(m: &Matrix, tol: f64) -> Result<OpNorm> {
    let ones = DVector::from_element(m.ncols(), 1.0);
    operator_norm_from(m, tol, &ones).map(|(r, _)| r)
}

/// Like [`operator_norm`] but from a caller-supplied start vector. Returns
/// the final right singular vector estimate for warm starts.
pub fn operator_norm_from(m: &Matrix, tol: f64, start: &DVector<f64>) -> Result<(OpNorm, DVector<f64>)> {
    if tol.is_nan() || tol <= 0.0 {
        return invalid("operator_norm tolerance must be positive");
    }
    if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
        return Err(DipsError::NonFinite(pos));
    }
    if start.len() != m.ncols() {
        return Err(DipsError::DimensionMismatch { expected: m.ncols(), got: start.len() });
    }
    let fro2 = m.norm_squared();
    if m.is_empty() || fro2 == 0.0 {
        let v = DVector::zeros(m.ncols());
        let r = OpNorm { value: 0.0, iterations: 0, converged: true, restarted: false };
        return Ok((r, v));
    }

    let first = power_run(m, tol, start, fro2);
    if first.converged && !first.collapsed {
        return Ok((first.norm(false), first.v));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let random = DVector::from_fn(m.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let second = power_run(m, tol, &random, fro2);
    let best = if second.value >= first.value || first.collapsed { second } else { first };
    Ok((best.norm(true), best.v))
}

struct Run {
    value: f64,
    iterations: usize,
    converged: bool,
    collapsed: bool,
    v: DVector<f64>,
}

impl Run {
    fn norm(&self, restarted: bool) -> OpNorm {
        OpNorm { value: self.value, iterations: self.iterations, converged: self.converged, restarted }
    }
}

fn power_run(m: &Matrix, tol: f64, start: &DVector<f64>, fro2: f64) -> Run {
    let mut v = start.clone();
    let n0 = v.norm();
    if n0 == 0.0 || !n0.is_finite() {
        return Run { value: 0.0, iterations: 0, converged: false, collapsed: true, v };
    }
    v /= n0;
    let mut theta = 0.0f64;
    for it in 1..=OPNORM_MAX_ITER {
        let u = m * &v;
        let next_theta = u.norm();
        let w = m.tr_mul(&u);
        let nw = w.norm();
        if nw <= 1e-13 * fro2 {
            // The start has (numerically) no component outside the null space.
            return Run { value: next_theta, iterations: it, converged: false, collapsed: true, v };
        }
        v = w / nw;
        if it > 1 && (next_theta - theta).abs() <= 0.1 * tol * next_theta {
            // One more product with the refined vector.
            let value = (m * &v).norm().max(next_theta);
            return Run { value, iterations: it, converged: true, collapsed: false, v };
        }
        theta = next_theta;
    }
    let value = (m * &v).norm().max(theta);
    Run { value, iterations: OPNORM_MAX_ITER, converged: false, collapsed: false, v }
}

/// Frobenius norm with compensated summation.
pub fn frobenius(m: &Matrix) -> f64 {
    ksum(m.iter().map(|x| x * x)).sqrt()
}

pub fn row_means(m: &Matrix) -> Vec<f64> {
    let nc = m.ncols().max(1) as f64;
    (0..m.nrows()).map(|i| ksum(m.row(i).iter().copied()) / nc).collect()
}

pub fn col_means(m: &Matrix) -> Vec<f64> {
    let nr = m.nrows().max(1) as f64;
    (0..m.ncols()).map(|j| ksum(m.column(j).iter().copied()) / nr).collect()
}

pub fn mean(m: &Matrix) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        ksum(m.iter().copied()) / m.len() as f64
    }
}

/// `c̃_ij = c_ij - c_i· - c_·j + c_··`.
pub fn double_center(m: &Matrix) -> Matrix {
    let r = row_means(m);
    let c = col_means(m);
    let g = mean(m);
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] - r[i] - c[j] + g)
}

/// Largest absolute row or column mean.
pub fn max_abs_margin_mean(m: &Matrix) -> f64 {
    row_means(m).into_iter().chain(col_means(m)).fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Checks double centering relative to `max(1, max|m|)`.
pub fn check_doubly_centered(m: &Matrix, tol: f64) -> Result<()> {
    let worst = max_abs_margin_mean(m);
    if worst > tol * 1f64.max(max_abs(m)) {
        return Err(DipsError::NotDoublyCentered { max_abs: worst });
    }
    Ok(())
}

/// Matrix from nested rows.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != nc) {
        return Err(DipsError::DimensionMismatch { expected: nc, got: bad.len() });
    }
    let m = Matrix::from_fn(nr, nc, |i, j| rows[i][j]);
    if let Some(pos) = m.iter().position(|x| !x.is_finite()) {
        return Err(DipsError::NonFinite(pos));
    }
    Ok(m)
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
