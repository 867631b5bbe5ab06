//! Classical regularized solvers for the linearized problem `J x ≈ y`.

mod bregman;
mod elastic_net;
mod prox;

use std::time::Duration;

pub use bregman::{bregman_l1, BregmanConfig, BregmanSolver, BregmanState};
pub use elastic_net::{
    elastic_net_solve, AlphaGrid, ElasticNetConfig, ElasticNetFit, ElasticNetSolver,
};
pub use prox::{elastic_net_prox, forward_backward_l1, soft_threshold};

/// Per-iteration diagnostics of an iterative solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveTrace {
    /// Objective at the starting point followed by one value per iteration.
    pub objective_values: Vec<f64>,
    /// `‖Jx − y‖` aligned with `objective_values`.
    pub residual_norms: Vec<f64>,
    pub wall_time: Duration,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.objective_values.len().saturating_sub(1)
    }

    /// CSV with columns `iteration,objective,residual_norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,residual_norm\n");
        for (k, (o, r)) in self
            .objective_values
            .iter()
            .zip(&self.residual_norms)
            .enumerate()
        {
            out.push_str(&format!("{k},{o:e},{r:e}\n"));
        }
        out
    }
}
