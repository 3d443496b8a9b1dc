use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::controller::{Case, CvpmProblem, StepDiagnostics, StepOutcome, Workspace};
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;
use crate::optimizers::{nelder_mead, NelderMeadOptions};

pub const MIN_SAMPLES: usize = 100;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub n_samples: usize,
    pub n_inside: usize,
    pub std_err: f64,
}

impl McEstimate {
    pub fn from_counts(n_inside: usize, n_samples: usize) -> Self {
        let p_hat = 1.0 - n_inside as f64 / n_samples as f64;
        Self {
            p_hat,
            n_samples,
            n_inside,
            std_err: (p_hat * (1.0 - p_hat) / n_samples as f64).sqrt(),
        }
    }
}

/// A fixed batch of zero-mean trajectory deviations, reused for every input
/// sequence it is asked about (common random numbers). Membership is tested
/// against a stacked target set in shifted coordinates.
#[derive(Clone, Debug)]
pub struct McEvaluator<'a> {
    problem: &'a CvpmProblem,
    target: Polytope,
    /// `F · E_i` for every sample, one column per sample.
    projected: DMatrix<f64>,
}

impl<'a> McEvaluator<'a> {
    /// Targets `X_P^{N−1} × X_f`.
    pub fn new(problem: &'a CvpmProblem, n_samples: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::with_target(problem, problem.augmented.clone(), n_samples, rng)
    }

    /// Deviations are drawn from `N(0, diag(Σ_x, …, Σ_x))` with the factor
    /// applied block by block, so the draw sequence does not depend on the
    /// target.
    pub fn with_target(
        problem: &'a CvpmProblem,
        target: Polytope,
        n_samples: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if n_samples < MIN_SAMPLES {
            return Err(Error::InvalidInput(format!(
                "need at least {MIN_SAMPLES} samples, got {n_samples}"
            )));
        }
        let (nx, n) = (problem.nx(), problem.horizon());
        check_dim(nx * n, target.dim())?;
        let chol = problem
            .sigma_x
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("Σ_x is not positive definite".into()))?
            .l();
        let mut dev = DMatrix::zeros(nx * n, n_samples);
        for i in 0..n_samples {
            for k in 0..n {
                let z = DVector::from_fn(nx, |_, _| rng.sample::<f64, _>(StandardNormal));
                dev.view_mut((k * nx, i), (nx, 1)).copy_from(&(&chol * z));
            }
        }
        let projected = target.f() * dev;
        Ok(Self {
            problem,
            target,
            projected,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.projected.ncols()
    }

    pub fn target(&self) -> &Polytope {
        &self.target
    }

    /// Estimate for a shifted mean trajectory.
    pub fn estimate_mean(&self, mean: &DVector<f64>) -> Result<McEstimate> {
        check_dim(self.target.dim(), mean.len())?;
        let r = self.target.g() - self.target.f() * mean;
        let inside = self
            .projected
            .column_iter()
            .filter(|col| col.iter().zip(r.iter()).all(|(a, b)| a <= b))
            .count();
        Ok(McEstimate::from_counts(inside, self.n_samples()))
    }

    /// Estimate for a shifted input sequence from state `x` (original
    /// coordinates).
    pub fn estimate_shifted(&self, x: &DVector<f64>, du: &DVector<f64>) -> Result<McEstimate> {
        let dx = self.problem.shift_state(x);
        let mean = self.problem.lifted.predict_mean(&dx, du)?;
        self.estimate_mean(&mean)
    }

    /// Estimate for an input sequence in original coordinates.
    pub fn estimate(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<McEstimate> {
        let du = u - stacked_target_input(self.problem);
        self.estimate_shifted(x, &du)
    }
}

fn stacked_target_input(problem: &CvpmProblem) -> DVector<f64> {
    let nu = problem.nu();
    DVector::from_fn(problem.horizon() * nu, |i, _| problem.target.u[i % nu])
}

/// Fraction of sampled state sequences that leave `X_P^{N−1} × X_f`, for
/// input sequence `u` applied from `x` (both in original coordinates).
pub fn monte_carlo_violation(
    problem: &CvpmProblem,
    x: &DVector<f64>,
    u: &DVector<f64>,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<McEstimate> {
    check_dim(problem.horizon() * problem.nu(), u.len())?;
    McEvaluator::new(problem, n_samples, rng)?.estimate(x, u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingOptions {
    pub n_samples: usize,
    pub max_evals: usize,
    /// Simplex diameter at which the search stops.
    pub x_tol: f64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            max_evals: 600,
            x_tol: 1e-4,
        }
    }
}

/// Sampling-based Case 2 with default options and a fresh workspace.
pub fn solve_case2_sampling(
    problem: &CvpmProblem,
    x: &DVector<f64>,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<StepOutcome> {
    let opts = SamplingOptions {
        n_samples,
        ..Default::default()
    };
    solve_case2_sampling_with(problem, x, &opts, rng, &mut Workspace::default())
}

/// Minimizes the Monte-Carlo violation estimate over the input box with
/// Nelder–Mead. One sample batch is drawn per call and shared by all
/// evaluations. The search starts from the Case-2 QP solution, so the result
/// is never worse than that input under the same samples.
pub fn solve_case2_sampling_with(
    problem: &CvpmProblem,
    x: &DVector<f64>,
    opts: &SamplingOptions,
    rng: &mut impl Rng,
    ws: &mut Workspace,
) -> Result<StepOutcome> {
    if problem.detect_case(x)? != Case::Probabilistic {
        return Err(Error::InvalidInput(
            "sampling-based solve needs a state outside X_C1".into(),
        ));
    }
    let (lo, hi) = problem.u_shifted.bounding_box()?;
    let u_box = Polytope::from_box(&lo, &hi)?;
    if !u_box.set_eq(&problem.u_shifted, 1e-9)? {
        return Err(Error::Unsupported(
            "sampling-based solve needs a box input set".into(),
        ));
    }
    let n = problem.horizon();
    let nu = problem.nu();
    let stack = |v: &DVector<f64>| DVector::from_fn(n * nu, |i, _| v[i % nu]);
    let (lo, hi) = (stack(&lo), stack(&hi));

    let qp = problem.solve_case2(x, ws)?;
    let u_s = stacked_target_input(problem);
    let du0 = &qp.u_star - &u_s;

    let eval = McEvaluator::new(problem, opts.n_samples, rng)?;
    let dx = problem.shift_state(x);
    let objective = |du: &DVector<f64>| {
        eval.estimate_shifted(x, du)
            .map(|e| e.p_hat)
            .unwrap_or(f64::INFINITY)
    };
    let nm = nelder_mead(
        objective,
        &du0,
        &lo,
        &hi,
        &NelderMeadOptions {
            max_evals: opts.max_evals,
            f_tol: 0.0,
            x_tol: opts.x_tol,
            initial_step: (&hi - &lo) * 0.1,
        },
    );
    let best = eval.estimate_shifted(x, &nm.x)?;
    let mean = problem.lifted.predict_mean(&dx, &nm.x)?;
    let nx = problem.nx();
    let x_bar = DVector::from_fn(mean.len(), |i, _| mean[i] + problem.target.x[i % nx]);
    let u_star = &nm.x + &u_s;
    Ok(StepOutcome {
        case: Case::Probabilistic,
        u_applied: u_star.rows(0, nu).into_owned(),
        u_star,
        x_bar,
        xi_star: None,
        p_violation: best.p_hat,
        objective: best.p_hat,
        diagnostics: StepDiagnostics {
            evaluations: nm.evals,
            budget_exhausted: nm.budget_exhausted,
            fallback: problem.x_c1_empty,
            ..Default::default()
        },
    })
}
