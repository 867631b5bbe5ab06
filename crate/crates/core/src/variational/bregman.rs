//! Bregman iteration with an ℓ1 penalty.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::prox::{check_shapes, forward_backward_l1};
use super::SolveTrace;
use crate::error::{DotError, Result};
use crate::linalg::{gram_norm, l1_norm};

#[derive(Clone, Debug, PartialEq)]
pub struct BregmanConfig {
    pub max_outer: usize,
    pub inner_iters: usize,
    /// `α = alpha_scale·‖Jᵀy‖∞`.
    pub alpha_scale: f64,
    /// `γ = step_scale / ‖JᵀJ‖`.
    pub step_scale: f64,
    pub power_tol: f64,
    pub power_max_iter: usize,
}

impl Default for BregmanConfig {
    fn default() -> Self {
        Self {
            max_outer: 100,
            inner_iters: 50,
            alpha_scale: 1.5,
            step_scale: 0.99,
            power_tol: 1e-6,
            power_max_iter: 10_000,
        }
    }
}

/// Iterate and ℓ1 subgradient after `outer_iter` Bregman steps.
#[derive(Clone, Debug, PartialEq)]
pub struct BregmanState {
    pub iterate: Vec<f64>,
    pub subgradient: Vec<f64>,
    pub outer_iter: usize,
    pub alpha: f64,
    pub gamma: f64,
}

/// Bregman solver bound to one matrix; `‖JᵀJ‖` is estimated once.
#[derive(Clone, Debug)]
pub struct BregmanSolver<'a> {
    j: &'a DMatrix<f64>,
    config: BregmanConfig,
    gram_norm: f64,
}

impl<'a> BregmanSolver<'a> {
    pub fn new(j: &'a DMatrix<f64>, config: BregmanConfig) -> Result<Self> {
        if config.inner_iters == 0 {
            return Err(DotError::InvalidArgument(
                "inner iteration count must be positive".into(),
            ));
        }
        let gram_norm = gram_norm(j, config.power_tol, config.power_max_iter)?;
        Ok(Self {
            j,
            config,
            gram_norm,
        })
    }

    pub fn gram_norm(&self) -> f64 {
        self.gram_norm
    }

    pub fn alpha_for(&self, y: &[f64]) -> f64 {
        let jty = self.j.tr_mul(&DVector::from_column_slice(y));
        self.config.alpha_scale * jty.amax()
    }

    /// State before the first outer step: zero iterate, zero subgradient.
    pub fn start(&self, y: &[f64]) -> Result<BregmanState> {
        check_shapes(self.j, y)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(DotError::InvalidArgument(
                "data contains non-finite values".into(),
            ));
        }
        let n = self.j.ncols();
        Ok(BregmanState {
            iterate: vec![0.0; n],
            subgradient: vec![0.0; n],
            outer_iter: 0,
            alpha: self.alpha_for(y),
            gamma: self.config.step_scale / self.gram_norm,
        })
    }

    /// One outer step: inner forward–backward solve warm-started at the
    /// current iterate, then `p ← p − (1/α)·Jᵀ(Jx − y)`.
    pub fn step(&self, state: &mut BregmanState, y: &[f64]) -> Result<()> {
        state.outer_iter += 1;
        if state.alpha == 0.0 {
            return Ok(());
        }
        let (x, _) = forward_backward_l1(
            self.j,
            y,
            &state.subgradient,
            state.alpha,
            state.gamma,
            self.config.inner_iters,
            Some(&state.iterate),
        )
        .map_err(|e| match e {
            DotError::Divergence { .. } => DotError::Divergence {
                stage: "bregman".into(),
                iteration: state.outer_iter,
            },
            e => e,
        })?;
        let xv = DVector::from_column_slice(&x);
        let mut r = DVector::from_column_slice(y);
        r.gemv(1.0, self.j, &xv, -1.0);
        let g = self.j.tr_mul(&r);
        for (p, gk) in state.subgradient.iter_mut().zip(g.iter()) {
            *p -= gk / state.alpha;
        }
        state.iterate = x;
        Ok(())
    }

    pub fn solve(&self, y: &[f64]) -> Result<(BregmanState, SolveTrace)> {
        let start = Instant::now();
        let mut state = self.start(y)?;
        let mut trace = SolveTrace::default();
        self.record(&state, y, &mut trace);
        for _ in 0..self.config.max_outer {
            self.step(&mut state, y)?;
            self.record(&state, y, &mut trace);
        }
        trace.wall_time = start.elapsed();
        Ok((state, trace))
    }

    fn record(&self, state: &BregmanState, y: &[f64], trace: &mut SolveTrace) {
        let x = DVector::from_column_slice(&state.iterate);
        let mut r = DVector::from_column_slice(y);
        r.gemv(1.0, self.j, &x, -1.0);
        let res = r.norm();
        trace
            .objective_values
            .push(0.5 * res * res + state.alpha * l1_norm(&state.iterate));
        trace.residual_norms.push(res);
    }
}

/// Bregman ℓ1 reconstruction with the default weight and step rules.
pub fn bregman_l1(
    j: &DMatrix<f64>,
    y: &[f64],
    max_outer: usize,
    inner_iters: usize,
) -> Result<(Vec<f64>, SolveTrace)> {
    let config = BregmanConfig {
        max_outer,
        inner_iters,
        ..BregmanConfig::default()
    };
    let (state, trace) = BregmanSolver::new(j, config)?.solve(y)?;
    Ok((state.iterate, trace))
}
