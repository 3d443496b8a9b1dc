//! Constraint-violation-probability-minimizing model predictive control.
//!
//! The controller handles `x⁺ = A x + B u + G w` with a truncated Gaussian
//! disturbance `w` supported on a polytope `W`. When some input sequence can
//! keep the state inside the constraints for every admissible disturbance,
//! it solves a robust tube MPC problem. Otherwise it picks the input that
//! minimizes the probability of leaving the constraint set.

pub mod controller;
pub mod error;
pub mod geometry;
pub mod lifting;
pub mod linalg;
pub mod optimizers;
pub mod probability;
pub mod sim;

pub use error::{Error, Result};
