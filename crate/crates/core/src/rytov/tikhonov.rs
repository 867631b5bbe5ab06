//! Spectral filtering of the sensitivity matrix.
//!
//! `x = Σ_i f_α(σ_i) ⟨u_i, y⟩ v_i` with `f_α(σ) = σ / (σ² + α)`, which is the
//! minimizer of `‖Jx − y‖² + α‖x‖²`. With `α = 0` the filter is `1/σ` over the
//! singular values above `1e−12·σ_max` (truncated pseudoinverse).

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{DotError, Result};

const TRUNCATION: f64 = 1e-12;

/// Tikhonov filter factor; `alpha = 0` gives the plain inverse `1/σ`.
pub fn filter_factor(sigma: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        if sigma > 0.0 {
            1.0 / sigma
        } else {
            0.0
        }
    } else {
        sigma / (sigma * sigma + alpha)
    }
}

/// Thin SVD of a matrix kept around for repeated filtered solves.
#[derive(Clone, Debug)]
pub struct FilteredSvd {
    u: DMatrix<f64>,
    singular_values: DVector<f64>,
    v_t: DMatrix<f64>,
}

impl FilteredSvd {
    pub fn new(j: &DMatrix<f64>) -> Result<Self> {
        let svd = SVD::try_new(j.clone(), true, true, f64::EPSILON, 10_000)
            .ok_or_else(|| DotError::Numeric("SVD did not converge".into()))?;
        match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => Ok(Self {
                u,
                singular_values: svd.singular_values,
                v_t,
            }),
            _ => Err(DotError::Numeric("SVD returned no singular vectors".into())),
        }
    }

    pub fn singular_values(&self) -> &DVector<f64> {
        &self.singular_values
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.max()
    }

    pub fn solve(&self, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
        if !(alpha >= 0.0) {
            return Err(DotError::InvalidArgument(format!(
                "regularization {alpha} must be non-negative"
            )));
        }
        if y.len() != self.u.nrows() {
            return Err(DotError::InvalidArgument(format!(
                "data length {} does not match {} rows",
                y.len(),
                self.u.nrows()
            )));
        }
        let y = DVector::from_column_slice(y);
        let mut coeffs = self.u.tr_mul(&y);
        let cutoff = TRUNCATION * self.sigma_max();
        for (c, &s) in coeffs.iter_mut().zip(self.singular_values.iter()) {
            *c *= if alpha == 0.0 && s <= cutoff {
                0.0
            } else {
                filter_factor(s, alpha)
            };
        }
        Ok(self.v_t.tr_mul(&coeffs).as_slice().to_vec())
    }
}

/// One-shot filtered solve; see [`FilteredSvd`] for repeated use.
pub fn tikhonov_filtered_solve(j: &DMatrix<f64>, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    FilteredSvd::new(j)?.solve(y, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let j = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
        let y = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        (j, y)
    }

    #[test]
    fn filter_values() {
        assert_eq!(filter_factor(1.0, 1.0), 0.5);
        assert_eq!(filter_factor(4.0, 0.0), 0.25);
        let alpha: f64 = 0.09;
        let peak = alpha.sqrt();
        assert!((filter_factor(peak, alpha) - 1.0 / (2.0 * peak)).abs() < 1e-15);
        let grid: Vec<f64> = (1..400).map(|k| k as f64 * 0.003).collect();
        for w in grid.windows(2) {
            let (a, b) = (filter_factor(w[0], alpha), filter_factor(w[1], alpha));
            if w[1] <= peak {
                assert!(b > a);
            } else if w[0] >= peak {
                assert!(b < a);
            }
        }
    }

    #[test]
    fn matches_normal_equations() {
        for seed in 0..10 {
            let (j, y) = random(8, 5, seed);
            let alpha = 0.37;
            let x = tikhonov_filtered_solve(&j, &y, alpha).unwrap();
            let lhs = j.tr_mul(&j) + DMatrix::identity(5, 5) * alpha;
            let rhs = j.tr_mul(&DVector::from_column_slice(&y));
            let oracle = lhs.cholesky().unwrap().solve(&rhs);
            for k in 0..5 {
                assert!((x[k] - oracle[k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_alpha_is_pseudoinverse() {
        let (j, y) = random(5, 8, 4);
        let x = tikhonov_filtered_solve(&j, &y, 0.0).unwrap();
        let pinv = j.clone().pseudo_inverse(1e-12).unwrap();
        let oracle = pinv * DVector::from_column_slice(&y);
        for k in 0..8 {
            assert!((x[k] - oracle[k]).abs() < 1e-9);
        }
    }

    #[test]
    fn solution_norm_shrinks_with_alpha() {
        let (j, y) = random(8, 5, 9);
        let svd = FilteredSvd::new(&j).unwrap();
        let norms: Vec<f64> = [0.01, 0.1, 1.0, 10.0, 100.0, 1e4]
            .iter()
            .map(|&a| DVector::from_vec(svd.solve(&y, a).unwrap()).norm())
            .collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]));
        assert!(*norms.last().unwrap() < 1e-3);
        assert!(svd.solve(&y, -1.0).is_err());
    }
}
