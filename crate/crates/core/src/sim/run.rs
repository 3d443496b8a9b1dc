use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::scenario::{Event, Method, Scenario};
use super::SimError;
use crate::controller::{Case, CvpmProblem, Workspace};
use crate::error::Error;
use crate::geometry::Polytope;
use crate::probability::{solve_case2_sampling_with, RngStream, SamplingOptions, TruncatedGaussian};

/// Disturbances are drawn from this stream of the scenario seed.
pub const PLANT_STREAM: u64 = 0;
/// Monte-Carlo estimates use this one, so both methods see the same plant
/// disturbances.
pub const SAMPLING_STREAM: u64 = 1;

mod nan_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// State at the start of the step.
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub case: Case,
    #[serde(with = "nan_null")]
    pub p_violation: f64,
    /// Case 1: optimal MPC cost. Case 2: optimal adapted Mahalanobis value.
    pub lyapunov: f64,
    /// Value of the problem actually solved; the Monte-Carlo estimate for
    /// sampling-based steps.
    #[serde(with = "nan_null")]
    pub objective: f64,
    pub active_set_size: usize,
    pub qp_iterations: usize,
    pub evaluations: usize,
    pub budget_exhausted: bool,
    /// Disturbance applied to the plant, unmodeled part included.
    pub w: Vec<f64>,
    /// A set-update event rebuilt the controller after this step.
    pub recomputed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedSet {
    pub name: String,
    /// Ordered vertices; empty above three dimensions.
    pub vertices: Vec<Vec<f64>>,
    pub hrep: Polytope,
}

/// Constraint set, terminal set, feasible-initial-state set and
/// disturbance set in original coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSnapshot {
    pub sets: Vec<NamedSet>,
}

impl SetSnapshot {
    pub fn of(problem: &CvpmProblem) -> Result<Self, Error> {
        let named = |name: &str, p: Polytope| -> Result<NamedSet, Error> {
            let vertices = if p.dim() <= 3 && !p.is_empty()? {
                p.vertices()?
                    .into_iter()
                    .map(|v| v.iter().copied().collect())
                    .collect()
            } else {
                Vec::new()
            };
            Ok(NamedSet {
                name: name.to_string(),
                vertices,
                hrep: p,
            })
        };
        let mut sets = vec![
            named("X_P", problem.x_p.clone())?,
            named("X_f", problem.x_f_absolute())?,
        ];
        if !problem.x_c1_empty {
            sets.push(named("X_C1", problem.x_c1_absolute())?);
        }
        sets.push(named("W", problem.system.w.clone())?);
        Ok(Self { sets })
    }

    pub fn get(&self, name: &str) -> Option<&NamedSet> {
        self.sets.iter().find(|s| s.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub name: String,
    pub method: Method,
    pub seed: u64,
    pub target_x: Vec<f64>,
    pub target_u: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    pub sets: SetSnapshot,
}

impl SimulationTrace {
    /// First step index tagged Safe.
    pub fn first_safe(&self) -> Option<usize> {
        self.steps.iter().position(|s| s.case == Case::Safe)
    }

    pub fn cases(&self) -> Vec<Case> {
        self.steps.iter().map(|s| s.case).collect()
    }
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn sampler_for(problem: &CvpmProblem, step: usize) -> Result<TruncatedGaussian, SimError> {
    TruncatedGaussian::new(&problem.system.sigma_w, &problem.system.w)
        .map_err(|source| SimError::Abort { step, source })
}

/// Simulates `x⁺ = A x + B u + G w` under the controller.
///
/// Within step `t` the controller acts on the measured state first, then
/// the events scheduled at `t` are applied, then the plant advances with
/// the sampled disturbance plus any unmodeled extra. A set update therefore
/// affects the controller from step `t + 1` on, and the plant disturbance
/// at `t` is already drawn from the updated set.
pub fn run_closed_loop(scenario: &Scenario) -> Result<SimulationTrace, SimError> {
    let parts = scenario.parts()?;
    let mut problem = scenario.build_problem()?;
    let mut sampler = sampler_for(&problem, 0)?;
    let mut plant_rng = RngStream::new(scenario.seed, PLANT_STREAM);
    let mut mc_rng = RngStream::new(scenario.seed, SAMPLING_STREAM);
    let mut ws = Workspace::default();
    let sampling = SamplingOptions {
        n_samples: scenario.mc_samples,
        ..Default::default()
    };
    let mut x = parts.x0;
    let mut steps = Vec::with_capacity(scenario.steps);

    for t in 0..scenario.steps {
        let abort = |source| SimError::Abort { step: t, source };
        let case = problem.detect_case(&x).map_err(abort)?;
        let (outcome, lyapunov) = match (case, scenario.method) {
            (Case::Safe, _) | (Case::Probabilistic, Method::Qp) => {
                let o = match case {
                    Case::Safe => problem.solve_case1(&x, &mut ws),
                    Case::Probabilistic => problem.solve_case2(&x, &mut ws),
                }
                .map_err(abort)?;
                let v = o.objective;
                (o, v)
            }
            (Case::Probabilistic, Method::Montecarlo) => {
                let o = solve_case2_sampling_with(&problem, &x, &sampling, &mut mc_rng, &mut ws)
                    .map_err(abort)?;
                // The sampling solve starts from the QP, which is now warm.
                let v = problem.solve_case2(&x, &mut ws).map_err(abort)?.objective;
                (o, v)
            }
        };

        let mut extra = DVector::zeros(problem.system.nw());
        let mut recomputed = false;
        for ev in scenario.events.iter().filter(|e| e.t == t) {
            match &ev.event {
                Event::UnmodeledDisturbance { w_extra } => {
                    extra += DVector::from_column_slice(w_extra);
                }
                Event::UpdateDisturbanceSet {
                    w,
                    sigma_w,
                    recompute_terminal,
                } => {
                    let w = w.to_polytope("event W")?;
                    let s = super::scenario::matrix(sigma_w, "event sigma_w")?;
                    problem = problem
                        .with_disturbance_set(w, s, *recompute_terminal)
                        .map_err(abort)?;
                    sampler = sampler_for(&problem, t)?;
                    recomputed = true;
                }
                Event::UpdateStateConstraints {
                    x_p,
                    recompute_terminal,
                } => {
                    let x_p = x_p.to_polytope("event X_P")?;
                    problem = problem
                        .with_state_constraints(x_p, *recompute_terminal)
                        .map_err(abort)?;
                    recomputed = true;
                }
            }
        }
        if recomputed {
            ws.reset();
        }

        let mut w = if scenario.zero_disturbance {
            DVector::zeros(problem.system.nw())
        } else {
            sampler.sample(&mut plant_rng).map_err(abort)?
        };
        w += extra;
        let d = &outcome.diagnostics;
        steps.push(StepRecord {
            t,
            x: to_vec(&x),
            u: to_vec(&outcome.u_applied),
            case: outcome.case,
            p_violation: outcome.p_violation,
            lyapunov,
            objective: outcome.objective,
            active_set_size: d.active_set_size,
            qp_iterations: d.qp_iterations,
            evaluations: d.evaluations,
            budget_exhausted: d.budget_exhausted,
            w: to_vec(&w),
            recomputed,
        });
        x = problem.system.step(&x, &outcome.u_applied, &w);
    }

    let sets = SetSnapshot::of(&problem).map_err(|source| SimError::Abort {
        step: scenario.steps,
        source,
    })?;
    Ok(SimulationTrace {
        name: scenario.name.clone(),
        method: scenario.method,
        seed: scenario.seed,
        target_x: to_vec(&problem.target.x),
        target_u: to_vec(&problem.target.u),
        steps,
        final_state: to_vec(&x),
        sets,
    })
}
