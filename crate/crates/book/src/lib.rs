// Each chapter becomes a module so that `cargo test --doc` runs its listings
// and a failure names the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/polytopes.md")]
pub mod polytopes {}
#[doc = include_str!("../../../book/src/controller.md")]
pub mod controller {}
#[doc = include_str!("../../../book/src/sampling.md")]
pub mod sampling {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
