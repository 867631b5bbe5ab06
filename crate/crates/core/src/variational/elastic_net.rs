//! Elastic-Net regression with a cross-validated weight.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::prox::{check_shapes, soft};
use crate::error::{DotError, Result};
use crate::linalg::{l1_norm, select_rows};

/// Candidate weights, tried from largest to smallest.
#[derive(Clone, Debug, PartialEq)]
pub enum AlphaGrid {
    /// Given values, strictly positive and strictly descending.
    Explicit(Vec<f64>),
    /// `count` log-spaced values in `[min_ratio, 1]·‖Jᵀy‖∞`.
    Relative { count: usize, min_ratio: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElasticNetConfig {
    /// Weight of the ℓ1 term relative to the squared ℓ2 term.
    pub theta: f64,
    pub alpha_grid: AlphaGrid,
    pub cv_folds: usize,
    /// Stop when no coordinate update of a full sweep changes the fit term
    /// by more than `tol·‖y‖²` (`G_kk·Δ_k² ≤ tol·‖y‖²`).
    pub tol: f64,
    /// Cap on coordinate sweeps per weight.
    pub max_iter: usize,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            alpha_grid: AlphaGrid::Relative {
                count: 30,
                min_ratio: 1e-4,
            },
            cv_folds: 5,
            tol: 1e-9,
            max_iter: 2000,
        }
    }
}

impl ElasticNetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(DotError::InvalidArgument(format!(
                "theta {} outside [0, 1]",
                self.theta
            )));
        }
        match &self.alpha_grid {
            AlphaGrid::Explicit(a) => {
                if a.is_empty() {
                    return Err(DotError::InvalidArgument("empty alpha grid".into()));
                }
                if a.iter().any(|&v| !(v > 0.0) || !v.is_finite())
                    || a.windows(2).any(|w| w[1] >= w[0])
                {
                    return Err(DotError::InvalidArgument(
                        "alpha grid must be positive and strictly descending".into(),
                    ));
                }
            }
            AlphaGrid::Relative { count, min_ratio } => {
                if *count == 0 {
                    return Err(DotError::InvalidArgument("empty alpha grid".into()));
                }
                if !(*min_ratio > 0.0 && *min_ratio <= 1.0) {
                    return Err(DotError::InvalidArgument(format!(
                        "grid ratio {min_ratio} outside (0, 1]"
                    )));
                }
            }
        }
        if self.cv_folds < 2 {
            return Err(DotError::InvalidArgument(
                "at least two folds are required".into(),
            ));
        }
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return Err(DotError::InvalidArgument("invalid stopping rule".into()));
        }
        Ok(())
    }

    fn alphas(&self, scale: f64) -> Vec<f64> {
        match &self.alpha_grid {
            AlphaGrid::Explicit(a) => a.clone(),
            AlphaGrid::Relative { count, min_ratio } => {
                if *count == 1 {
                    return vec![scale];
                }
                let lo = min_ratio.ln();
                (0..*count)
                    .map(|k| scale * (lo * k as f64 / (*count - 1) as f64).exp())
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElasticNetFit {
    pub x: Vec<f64>,
    pub alpha: f64,
    /// Candidate weights, descending.
    pub alphas: Vec<f64>,
    /// Summed held-out squared residual per candidate.
    pub cv_errors: Vec<f64>,
}

/// A row subset of the matrix with its Gram matrix.
#[derive(Clone, Debug)]
struct Block {
    j: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl Block {
    fn new(j: DMatrix<f64>) -> Self {
        let gram = j.tr_mul(&j);
        Self { j, gram }
    }
}

/// Elastic-Net solver bound to one matrix; fold splits and Gram matrices
/// are computed once and reused for every data vector.
#[derive(Clone, Debug)]
pub struct ElasticNetSolver {
    config: ElasticNetConfig,
    full: Block,
    folds: Vec<(Vec<usize>, Vec<usize>, Block)>,
}

impl ElasticNetSolver {
    pub fn new(j: &DMatrix<f64>, config: ElasticNetConfig) -> Result<Self> {
        config.validate()?;
        let m = j.nrows();
        if m < config.cv_folds {
            return Err(DotError::InvalidArgument(format!(
                "{m} rows cannot be split into {} folds",
                config.cv_folds
            )));
        }
        let folds = (0..config.cv_folds)
            .map(|f| {
                let (test, train): (Vec<usize>, Vec<usize>) =
                    (0..m).partition(|i| i % config.cv_folds == f);
                (train.clone(), test, Block::new(select_rows(j, &train)))
            })
            .collect();
        Ok(Self {
            full: Block::new(j.clone()),
            config,
            folds,
        })
    }

    pub fn solve(&self, y: &[f64]) -> Result<ElasticNetFit> {
        check_shapes(&self.full.j, y)?;
        let yv = DVector::from_column_slice(y);
        let scale = self.full.j.tr_mul(&yv).amax();
        let n = self.full.j.ncols();
        if scale == 0.0 && matches!(self.config.alpha_grid, AlphaGrid::Relative { .. }) {
            return Ok(ElasticNetFit {
                x: vec![0.0; n],
                alpha: 0.0,
                alphas: Vec::new(),
                cv_errors: Vec::new(),
            });
        }
        let alphas = self.config.alphas(scale);
        let cv_errors: Vec<f64> = self
            .folds
            .par_iter()
            .map(|(train, test, block)| {
                let y_train: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let path = self.path(block, &y_train, &alphas)?;
                Ok(path
                    .iter()
                    .map(|x| {
                        let xv = DVector::from_column_slice(x);
                        test.iter()
                            .map(|&i| {
                                let r = self.full.j.row(i).dot(&xv.transpose()) - y[i];
                                r * r
                            })
                            .sum::<f64>()
                    })
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(vec![0.0; alphas.len()], |mut acc, e| {
                for (a, v) in acc.iter_mut().zip(e) {
                    *a += v;
                }
                acc
            });
        // Ties go to the larger weight.
        let best = cv_errors
            .iter()
            .enumerate()
            .fold(0, |b, (k, &e)| if e < cv_errors[b] { k } else { b });
        let path = self.path(&self.full, y, &alphas[..=best])?;
        Ok(ElasticNetFit {
            x: path.into_iter().last().unwrap_or_else(|| vec![0.0; n]),
            alpha: alphas[best],
            alphas,
            cv_errors,
        })
    }

    /// Solutions along a descending weight sequence, each warm-started at
    /// the previous one.
    fn path(&self, block: &Block, y: &[f64], alphas: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut x = vec![0.0; block.j.ncols()];
        let mut out = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            x = self.fit(block, y, alpha, &x)?;
            out.push(x.clone());
        }
        Ok(out)
    }

    /// Cyclic coordinate descent on the Gram matrix. A full sweep picks the
    /// sign pattern, which is then solved exactly; a full sweep that moves
    /// nothing ends the fit. Active-set sweeps stand in for the exact solve
    /// when the reduced system is singular.
    fn fit(&self, block: &Block, y: &[f64], alpha: f64, x0: &[f64]) -> Result<Vec<f64>> {
        let g = &block.gram;
        let n = g.ncols();
        let l1 = alpha * self.config.theta;
        let l2 = 2.0 * alpha * (1.0 - self.config.theta);
        let mut x = x0.to_vec();
        // c = Jᵀy − G x
        let mut c = block.j.tr_mul(&DVector::from_column_slice(y));
        c.gemv(-1.0, g, &DVector::from_column_slice(x0), 1.0);
        let all: Vec<usize> = (0..n).collect();

        let sweep = |coords: &[usize], x: &mut [f64], c: &mut DVector<f64>| -> f64 {
            let mut max_decrease = 0.0f64;
            for &k in coords {
                let gkk = g[(k, k)];
                if gkk == 0.0 {
                    continue;
                }
                let new = soft(c[k] + gkk * x[k], l1) / (gkk + l2);
                let d = new - x[k];
                if d != 0.0 {
                    c.axpy(-d, &g.column(k), 1.0);
                    x[k] = new;
                    max_decrease = max_decrease.max(gkk * d * d);
                }
            }
            max_decrease
        };
        // Exact minimizer on the current sign pattern. When a coordinate would
        // change sign, step to where it hits zero, drop it and re-solve on
        // the smaller pattern; the right-hand side `(Jᵀy)_S − l1·sign(x_S)`
        // does not depend on x, so the factor is downdated, not rebuilt.
        // `None` when the reduced system is singular.
        let newton = |x: &mut [f64], c: &mut DVector<f64>| -> Option<()> {
            let mut support: Vec<usize> = (0..n).filter(|&k| x[k] != 0.0).collect();
            if support.is_empty() {
                return Some(());
            }
            let a = support.len();
            let before: Vec<(usize, f64)> = support.iter().map(|&k| (k, x[k])).collect();
            let xv = DVector::from_column_slice(x);
            let mut xs: Vec<f64> = support.iter().map(|&k| x[k]).collect();
            let mut rhs: Vec<f64> = support
                .iter()
                .zip(&xs)
                .map(|(&k, v)| c[k] + g.column(k).dot(&xv) - l1 * v.signum())
                .collect();
            let mut chol = (DMatrix::from_fn(a, a, |r, q| g[(support[r], support[q])])
                + DMatrix::identity(a, a) * l2)
                .cholesky()?;
            while !support.is_empty() {
                let z = chol.solve(&DVector::from_column_slice(&rhs));
                let mut t = 1.0f64;
                let mut blocking = None;
                for (r, &v) in xs.iter().enumerate() {
                    if z[r].signum() != v.signum() {
                        let tr = v / (v - z[r]);
                        if tr < t {
                            t = tr;
                            blocking = Some(r);
                        }
                    }
                }
                for (r, v) in xs.iter_mut().enumerate() {
                    *v += t * (z[r] - *v);
                }
                let Some(r) = blocking else { break };
                for (&k, &v) in support.iter().zip(&xs) {
                    x[k] = v;
                }
                x[support[r]] = 0.0;
                support.remove(r);
                xs.remove(r);
                rhs.remove(r);
                chol = chol.remove_column(r);
            }
            for (&k, &v) in support.iter().zip(&xs) {
                x[k] = v;
            }
            for (k, v) in before {
                let d = x[k] - v;
                if d != 0.0 {
                    c.axpy(-d, &g.column(k), 1.0);
                }
            }
            Some(())
        };
        let limit = self.config.tol * y.iter().map(|v| v * v).sum::<f64>();
        let settled = |decrease: f64| decrease <= limit;

        let mut sweeps = 0;
        while sweeps < self.config.max_iter {
            let full = sweep(&all, &mut x, &mut c);
            sweeps += 1;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(DotError::Divergence {
                    stage: "elastic-net".into(),
                    iteration: sweeps,
                });
            }
            if settled(full) {
                break;
            }
            if newton(&mut x, &mut c).is_some() {
                continue;
            }
            // Settle the active coordinates on their own compact Gram block.
            let active: Vec<usize> = (0..n).filter(|&k| x[k] != 0.0).collect();
            let a = active.len();
            let ga = DMatrix::from_fn(a, a, |r, q| g[(active[r], active[q])]);
            let before: Vec<f64> = active.iter().map(|&k| x[k]).collect();
            let mut xa = before.clone();
            let mut ca = DVector::from_fn(a, |r, _| c[active[r]]);
            while sweeps < self.config.max_iter {
                sweeps += 1;
                let mut max_decrease = 0.0f64;
                for r in 0..a {
                    let grr = ga[(r, r)];
                    let new = soft(ca[r] + grr * xa[r], l1) / (grr + l2);
                    let d = new - xa[r];
                    if d != 0.0 {
                        ca.axpy(-d, &ga.column(r), 1.0);
                        xa[r] = new;
                        max_decrease = max_decrease.max(grr * d * d);
                    }
                }
                if settled(max_decrease) {
                    break;
                }
            }
            for (r, &k) in active.iter().enumerate() {
                let d = xa[r] - before[r];
                if d != 0.0 {
                    c.axpy(-d, &g.column(k), 1.0);
                    x[k] = xa[r];
                }
            }
        }
        Ok(x)
    }

    /// `½‖Jx − y‖² + α(θ‖x‖₁ + (1 − θ)‖x‖²)` on the full matrix.
    pub fn objective(&self, x: &[f64], y: &[f64], alpha: f64) -> f64 {
        let xv = DVector::from_column_slice(x);
        let mut r = DVector::from_column_slice(y);
        r.gemv(1.0, &self.full.j, &xv, -1.0);
        let theta = self.config.theta;
        0.5 * r.norm_squared() + alpha * (theta * l1_norm(x) + (1.0 - theta) * xv.norm_squared())
    }
}

/// One-shot Elastic-Net reconstruction; see [`ElasticNetSolver`] for reuse.
pub fn elastic_net_solve(
    j: &DMatrix<f64>,
    y: &[f64],
    config: &ElasticNetConfig,
) -> Result<ElasticNetFit> {
    ElasticNetSolver::new(j, config.clone())?.solve(y)
}
