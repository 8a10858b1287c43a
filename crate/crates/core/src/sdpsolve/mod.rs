//! Semidefinite solving: a self-contained interior-point solver plus an
//! SDPA sparse-format bridge for external solvers.
//!
//! The problems handled here are the equality-form programs produced by
//! relaxation assembly: maximize a linear functional of free scalars
//! subject to linear equalities coupling the free scalars with symmetric
//! PSD blocks.

mod ipm;
mod sdpa;

pub use sdpa::{export_sdpa, parse_sdpa, SdpaEntry, SdpaError, SdpaFile};

use std::fmt;

use nalgebra::DMatrix;

use crate::sosrelax::SdpProblem;

/// Numerical controls for the interior-point solver.
#[derive(Clone, Debug)]
pub struct SolverSettings {
    /// Relative feasibility target for primal and dual residuals.
    pub feas_tol: f64,
    /// Relative duality-gap target.
    pub gap_tol: f64,
    /// Allowed eigenvalue dip below zero when a block is validated.
    pub eig_tol: f64,
    pub max_iterations: usize,
    /// 0 is silent; 1 logs a summary per solve; 2 logs every iteration.
    pub verbosity: u8,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            eig_tol: 1e-7,
            max_iterations: 200,
            verbosity: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    /// Converged to the requested tolerances.
    Optimal,
    /// The equalities admit no PSD solution.
    Infeasible,
    /// The objective grows without bound along a feasible ray.
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::NumericalFailure => "numerical_failure",
        };
        write!(f, "{s}")
    }
}

/// Solver output. `blocks` and `free_values` hold the best primal iterate
/// even when the status is not optimal; callers must check `status` before
/// trusting `objective`.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Value of the maximized functional at the final iterate.
    pub objective: f64,
    pub free_values: Vec<f64>,
    pub blocks: Vec<DMatrix<f64>>,
    /// Equality multipliers, aligned with the problem rows.
    pub dual_values: Vec<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub relative_gap: f64,
    pub diagnostic: Option<String>,
}

/// Solve the block SDP. Rows that reduce to `0 = rhs` are settled before
/// the interior-point iteration: a nonzero `rhs` is an immediate
/// infeasibility witness and a zero one carries no information.
pub fn solve(sdp: &SdpProblem, settings: &SolverSettings) -> SdpSolution {
    let mut kept = Vec::with_capacity(sdp.rows.len());
    for (r, row) in sdp.rows.iter().enumerate() {
        if row.entries.is_empty() && row.free.is_empty() {
            if row.rhs != 0.0 {
                return SdpSolution {
                    status: SolveStatus::Infeasible,
                    objective: 0.0,
                    free_values: vec![0.0; sdp.num_free],
                    blocks: sdp
                        .block_sizes
                        .iter()
                        .map(|&s| DMatrix::zeros(s, s))
                        .collect(),
                    dual_values: vec![0.0; sdp.rows.len()],
                    iterations: 0,
                    primal_residual: f64::INFINITY,
                    dual_residual: 0.0,
                    relative_gap: f64::INFINITY,
                    diagnostic: Some(format!(
                        "row {r} demands 0 = {} with no variables on the left",
                        row.rhs
                    )),
                };
            }
            continue;
        }
        kept.push(r);
    }
    let mut solution = ipm::run(sdp, &kept, settings);
    // Scatter multipliers of the solved subsystem back onto all rows.
    let mut duals = vec![0.0; sdp.rows.len()];
    for (k, &r) in kept.iter().enumerate() {
        duals[r] = solution.dual_values[k];
    }
    solution.dual_values = duals;
    solution
}

/// The interior-point iteration on the problem as given, with no row
/// preprocessing. `solve` wraps this behind the `0 = rhs` screen.
pub fn reference_ipm(sdp: &SdpProblem, settings: &SolverSettings) -> SdpSolution {
    let all: Vec<usize> = (0..sdp.rows.len()).collect();
    ipm::run(sdp, &all, settings)
}
