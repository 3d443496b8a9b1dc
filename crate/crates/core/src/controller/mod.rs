//! The two-case controller: robust tube MPC when zero violation can be
//! guaranteed, violation-probability minimization otherwise.

mod problem;
mod step;
mod system;

pub use problem::{
    compute_case1_set, compute_terminal_set, rci_slack, validate_assumptions, AssumptionCheck,
    AssumptionReport, CvpmProblem, InvarianceDiagnostic, TerminalSet, SLACK_TOL,
};
pub use step::{cvpm_step, Case, StepDiagnostics, StepOutcome, Workspace, BOUNDARY_BAND};
pub use system::{steady_state_target, LinearSystem, MpcConfig, SteadyStateTarget, EQUILIBRIUM_TOL};
