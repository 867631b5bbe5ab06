//! Proximal operators and the ℓ1 forward–backward iteration.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::SolveTrace;
use crate::error::{DotError, Result};
use crate::linalg::{dot, l1_norm};

/// `sign(v)·max(0, |v| − β)` elementwise.
pub fn soft_threshold(v: &[f64], beta: f64) -> Vec<f64> {
    v.iter().map(|&x| soft(x, beta)).collect()
}

#[inline]
pub(crate) fn soft(x: f64, beta: f64) -> f64 {
    if x > beta {
        x - beta
    } else if x < -beta {
        x + beta
    } else {
        0.0
    }
}

/// Proximal map of `γ·α(θ‖x‖₁ + (1 − θ)‖x‖²)`.
pub fn elastic_net_prox(v: &[f64], gamma: f64, alpha: f64, theta: f64) -> Vec<f64> {
    let shrink = 1.0 + 2.0 * gamma * alpha * (1.0 - theta);
    v.iter()
        .map(|&x| soft(x, gamma * alpha * theta) / shrink)
        .collect()
}

pub(crate) fn check_shapes(j: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if j.nrows() != y.len() {
        return Err(DotError::InvalidArgument(format!(
            "data length {} does not match {} rows",
            y.len(),
            j.nrows()
        )));
    }
    Ok(())
}

/// Forward–backward iteration for
/// `½‖Jx − y‖² + α‖x‖₁ − α⟨p, x⟩`:
///
/// ```text
/// z ← (I − γJᵀJ)x + γ(Jᵀy + αp)
/// x ← soft_{γα}(z)
/// ```
///
/// The trace records the objective at `x0` and after every step.
pub fn forward_backward_l1(
    j: &DMatrix<f64>,
    y: &[f64],
    p: &[f64],
    alpha: f64,
    gamma: f64,
    iters: usize,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveTrace)> {
    check_shapes(j, y)?;
    let n = j.ncols();
    if p.len() != n {
        return Err(DotError::InvalidArgument(format!(
            "linear term has length {}, expected {n}",
            p.len()
        )));
    }
    if iters == 0 {
        return Err(DotError::InvalidArgument(
            "at least one iteration is required".into(),
        ));
    }
    if !(gamma > 0.0) || !(alpha >= 0.0) {
        return Err(DotError::InvalidArgument(format!(
            "invalid step {gamma} or weight {alpha}"
        )));
    }
    let start = Instant::now();
    let yv = DVector::from_column_slice(y);
    let mut x = match x0 {
        Some(x0) if x0.len() == n => DVector::from_column_slice(x0),
        Some(x0) => {
            return Err(DotError::InvalidArgument(format!(
                "start has length {}, expected {n}",
                x0.len()
            )));
        }
        None => DVector::zeros(n),
    };
    let mut r = DVector::zeros(j.nrows());
    let mut g = DVector::zeros(n);
    let mut trace = SolveTrace::default();
    let objective = |x: &DVector<f64>, r: &DVector<f64>| {
        0.5 * r.norm_squared() + alpha * (l1_norm(x.as_slice()) - dot(p, x.as_slice()))
    };
    for it in 0..=iters {
        r.copy_from(&yv);
        r.gemv(1.0, j, &x, -1.0);
        trace.objective_values.push(objective(&x, &r));
        trace.residual_norms.push(r.norm());
        if it == iters {
            break;
        }
        // x − γ(Jᵀ(Jx − y) − αp) = (I − γJᵀJ)x + γ(Jᵀy + αp)
        g.gemv_tr(1.0, j, &r, 0.0);
        for k in 0..n {
            let z = x[k] - gamma * (g[k] - alpha * p[k]);
            x[k] = soft(z, gamma * alpha);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DotError::Divergence {
                stage: "forward-backward".into(),
                iteration: it + 1,
            });
        }
    }
    trace.wall_time = start.elapsed();
    Ok((x.as_slice().to_vec(), trace))
}
