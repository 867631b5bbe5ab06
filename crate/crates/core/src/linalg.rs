//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DotError, Result};

const POWER_SEED: u64 = 0x005e_ed0f_9a11;

/// `‖JᵀJ‖₂` (largest eigenvalue of the Gram matrix) by power iteration from a
/// fixed pseudo-random start, stopped at `rel_tol` relative change.
pub fn gram_norm(j: &DMatrix<f64>, rel_tol: f64, max_iter: usize) -> Result<f64> {
    let n = j.ncols();
    if n == 0 || j.nrows() == 0 {
        return Err(DotError::InvalidArgument("empty matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    v /= v.norm();
    let mut jv = DVector::zeros(j.nrows());
    let mut w = DVector::zeros(n);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        jv.gemv(1.0, j, &v, 0.0);
        w.gemv_tr(1.0, j, &jv, 0.0);
        let next = w.norm();
        if next == 0.0 {
            return Err(DotError::Numeric("matrix is zero".into()));
        }
        v.copy_from(&w);
        v /= next;
        if (next - lambda).abs() <= rel_tol * next {
            return Ok(next);
        }
        lambda = next;
    }
    Err(DotError::Numeric(format!(
        "power iteration did not reach {rel_tol:e} relative accuracy in {max_iter} steps"
    )))
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows `rows` of `j` as a new matrix.
pub fn select_rows(j: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), j.ncols(), |r, c| j[(rows[r], c)])
}
