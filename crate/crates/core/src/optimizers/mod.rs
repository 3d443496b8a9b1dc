//! Dense LP and convex QP solvers, plus a derivative-free simplex search.

pub mod lp;
pub mod nelder_mead;
pub mod qp;

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use lp::{solve_lp, Certificate, LpProblem, LpSolution, SolveStatus, StatusKind};
pub use qp::{kkt_residual, solve_qp, ActiveSetSolver, QpProblem, QpSolution, QpWarmStart};
