//! Certified lower bounds for polynomial optimization.
//!
//! Given `f` and a basic closed set `K = {g_1 >= 0, ..., g_s >= 0}`, the
//! pipeline forms the critical ideal of the pair, truncates it at degree
//! `2d`, and maximizes `Gamma` subject to
//!
//! ```text
//! f - Gamma = sum_e sigma_e * g^e  +  sum_J phi_J * (g_J * h_{J^c})
//! ```
//!
//! with each `sigma_e` a sum of squares. The search over `(Gamma, sigma,
//! phi)` is a semidefinite program; its optimum never exceeds the infimum of
//! `f` on `K` restricted to the critical variety, and the multipliers form a
//! certificate that can be re-verified in exact arithmetic.
//!
//! Module map: [`polyring`] is the exact symbolic layer, [`critical`] builds
//! the ideal generators, [`sosrelax`] assembles the degree-`d` SDP,
//! [`sdpsolve`] solves or exports it, [`certify`] extracts and checks
//! certificates, and [`hierarchy`] sweeps `d` and reports.

pub mod certify;
pub mod critical;
pub mod hierarchy;
pub mod polyring;
pub mod sdpsolve;
pub mod sosrelax;

pub use certify::{Certificate, FloatPoly, VerifyReport};
pub use critical::{ConstraintSubset, GeneratorMode, GeneratorSet, Problem};
pub use hierarchy::{HierarchyOptions, HierarchyResult, ReportFormat};
pub use polyring::{Monomial, PolyMatrix, Polynomial};
pub use sdpsolve::{SdpSolution, SolveStatus, SolverSettings};
pub use sosrelax::{Relaxation, SdpProblem};
