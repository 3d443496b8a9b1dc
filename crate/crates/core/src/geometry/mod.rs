//! Bounded polytopes in halfspace representation.

mod hull;
mod polytope;
mod projection;
mod vertices;

pub use hull::convex_hull;
pub use polytope::{ImplicitSum, Polytope, GEOM_TOL};
pub use projection::DEFAULT_ROW_BUDGET;
