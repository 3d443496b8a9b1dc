//! Disturbance sampling and Monte-Carlo estimates of the constraint
//! violation probability.

mod montecarlo;
mod rng;
mod sampling;

pub use montecarlo::{
    monte_carlo_violation, solve_case2_sampling, solve_case2_sampling_with, McEstimate,
    McEvaluator, SamplingOptions, DEFAULT_SAMPLES, MIN_SAMPLES,
};
pub use rng::RngStream;
pub use sampling::{mvn_sample, sample_truncated_gaussian, TruncatedGaussian, MIN_ACCEPTANCE};
