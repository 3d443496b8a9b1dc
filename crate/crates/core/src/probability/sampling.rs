use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::RngStream;
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;

/// Probe draws used to reject pathological truncations up front.
const PROBE_DRAWS: usize = 50_000;
/// Smallest acceptable acceptance rate of the rejection sampler.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
const MAX_ATTEMPTS: usize = 10_000_000;

fn standard_normal(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// `mean + L z` with `z` standard normal.
pub fn mvn_sample(mean: &DVector<f64>, cov_chol: &DMatrix<f64>, rng: &mut impl Rng) -> DVector<f64> {
    mean + cov_chol * standard_normal(cov_chol.ncols(), rng)
}

/// `N(0, Σ)` restricted to a polytope, by rejection.
#[derive(Clone, Debug)]
pub struct TruncatedGaussian {
    chol: DMatrix<f64>,
    support: Polytope,
    acceptance: f64,
}

impl TruncatedGaussian {
    pub fn new(sigma: &DMatrix<f64>, support: &Polytope) -> Result<Self> {
        let n = support.dim();
        check_dim(n, sigma.nrows())?;
        check_dim(n, sigma.ncols())?;
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("covariance must be positive definite".into()))?
            .l();
        if !support.contains(&DVector::zeros(n), 0.0)? {
            return Err(Error::InvalidInput("truncation set must contain the origin".into()));
        }
        let mut probe = RngStream::new(0x243f_6a88_85a3_08d3, u64::MAX);
        let zero = DVector::zeros(n);
        let mut accepted = 0usize;
        for _ in 0..PROBE_DRAWS {
            if support.contains(&mvn_sample(&zero, &chol, &mut probe), 0.0)? {
                accepted += 1;
            }
        }
        let acceptance = accepted as f64 / PROBE_DRAWS as f64;
        if acceptance < MIN_ACCEPTANCE {
            return Err(Error::InvalidInput(format!(
                "pathological truncation: acceptance rate {acceptance:.2e}"
            )));
        }
        Ok(Self {
            chol,
            support: support.clone(),
            acceptance,
        })
    }

    /// Acceptance rate measured on the probe batch.
    pub fn acceptance(&self) -> f64 {
        self.acceptance
    }

    pub fn support(&self) -> &Polytope {
        &self.support
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<DVector<f64>> {
        let zero = DVector::zeros(self.chol.nrows());
        for _ in 0..MAX_ATTEMPTS {
            let w = mvn_sample(&zero, &self.chol, rng);
            if self.support.contains(&w, 0.0)? {
                return Ok(w);
            }
        }
        Err(Error::ResourceLimit(format!(
            "no sample accepted in {MAX_ATTEMPTS} attempts"
        )))
    }
}

/// One draw of `N(0, Σ_w)` truncated to `W`. Builds the sampler each call;
/// keep a [`TruncatedGaussian`] around for repeated draws.
pub fn sample_truncated_gaussian(
    sigma_w: &DMatrix<f64>,
    w: &Polytope,
    rng: &mut impl Rng,
) -> Result<DVector<f64>> {
    TruncatedGaussian::new(sigma_w, w)?.sample(rng)
}
