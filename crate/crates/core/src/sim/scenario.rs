use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::controller::{validate_assumptions, AssumptionReport, CvpmProblem, LinearSystem, MpcConfig};
use crate::error::Error;
use crate::geometry::Polytope;
use crate::probability::DEFAULT_SAMPLES;

/// Row-major matrix as nested arrays.
pub type Matrix = Vec<Vec<f64>>;

/// A set given either as an axis-aligned box or in H-representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetSpec {
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    HRep {
        #[serde(rename = "F")]
        f: Matrix,
        g: Vec<f64>,
    },
}

impl SetSpec {
    pub fn to_polytope(&self, field: &str) -> Result<Polytope, SimError> {
        let p = match self {
            SetSpec::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(SimError::schema(field, "lower and upper differ in length"));
                }
                Polytope::from_box(
                    &DVector::from_column_slice(lower),
                    &DVector::from_column_slice(upper),
                )
            }
            SetSpec::HRep { f, g } => {
                let m = matrix(f, field)?;
                if m.nrows() != g.len() {
                    return Err(SimError::schema(field, "F and g differ in row count"));
                }
                Polytope::new(m, DVector::from_column_slice(g))
            }
        };
        let p = p.map_err(|e| SimError::schema(field, e.to_string()))?;
        if p.is_empty().map_err(|e| SimError::schema(field, e.to_string()))? {
            return Err(SimError::schema(field, "set is empty"));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        match self {
            SetSpec::Box { lower, .. } => lower.len(),
            SetSpec::HRep { f, .. } => f.first().map_or(0, Vec::len),
        }
    }
}

pub(crate) fn matrix(rows: &Matrix, field: &str) -> Result<DMatrix<f64>, SimError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(SimError::schema(field, "matrix is empty"));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(SimError::schema(field, "rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SimError::schema(field, "non-finite entry"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    #[serde(rename = "A")]
    pub a: Matrix,
    #[serde(rename = "B")]
    pub b: Matrix,
    #[serde(rename = "G")]
    pub g: Matrix,
    pub sigma_w: Matrix,
    #[serde(rename = "W")]
    pub w: SetSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpec {
    pub horizon: usize,
    #[serde(rename = "Q")]
    pub q: Matrix,
    #[serde(rename = "R")]
    pub r: Matrix,
    pub x_ref: Vec<f64>,
    pub u_ref: Vec<f64>,
    pub dt: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Qp,
    Montecarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Qp => "qp",
            Method::Montecarlo => "montecarlo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    /// Added to the sampled disturbance for exactly one step.
    UnmodeledDisturbance { w_extra: Vec<f64> },
    UpdateDisturbanceSet {
        #[serde(rename = "W")]
        w: SetSpec,
        sigma_w: Matrix,
        /// Recompute `X_f` for the new set instead of keeping the old one.
        #[serde(default)]
        recompute_terminal: bool,
    },
    UpdateStateConstraints {
        #[serde(rename = "X_P")]
        x_p: SetSpec,
        #[serde(default)]
        recompute_terminal: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t: usize,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub system: SystemSpec,
    pub config: ConfigSpec,
    #[serde(rename = "X_P")]
    pub x_p: SetSpec,
    #[serde(rename = "U")]
    pub u: SetSpec,
    pub x0: Vec<f64>,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    /// Run the plant without random disturbances. Unmodeled disturbances
    /// are still applied.
    #[serde(default)]
    pub zero_disturbance: bool,
    #[serde(default)]
    pub events: Vec<TimedEvent>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

/// The DC-DC converter example: voltage regulation at 3.3 V through the
/// duty cycle. The initial state and the unmodeled disturbance at `t = 50`
/// are choices of this crate.
pub fn builtin_dcdc_scenario() -> Scenario {
    Scenario {
        name: "dcdc".into(),
        system: SystemSpec {
            a: vec![vec![0.99, -0.02], vec![0.21, 0.92]],
            b: vec![vec![0.30], vec![0.06]],
            g: vec![vec![0.02, 0.0], vec![0.01, 0.19]],
            sigma_w: vec![vec![0.2, 0.0], vec![0.0, 0.2]],
            w: SetSpec::Box {
                lower: vec![-0.2, -0.2],
                upper: vec![0.2, 0.2],
            },
        },
        config: ConfigSpec {
            horizon: 10,
            q: vec![vec![1.0, 0.0], vec![0.0, 5.0]],
            r: vec![vec![1.0]],
            x_ref: vec![1.06, 3.30],
            u_ref: vec![0.28],
            dt: 0.1,
        },
        x_p: SetSpec::Box {
            lower: vec![0.0, 2.8],
            upper: vec![2.0, 3.8],
        },
        u: SetSpec::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        },
        x0: vec![2.4, 2.6],
        steps: 100,
        seed: 42,
        method: Method::Qp,
        mc_samples: DEFAULT_SAMPLES,
        zero_disturbance: false,
        events: vec![TimedEvent {
            t: 50,
            event: Event::UnmodeledDisturbance {
                w_extra: vec![0.0, 4.0],
            },
        }],
    }
}

/// Parsed pieces of a scenario, before the controller is built.
#[derive(Clone, Debug)]
pub struct ScenarioParts {
    pub system: LinearSystem,
    pub config: MpcConfig,
    pub x_p: Polytope,
    pub u: Polytope,
    pub x0: DVector<f64>,
}

fn invalid(field: &str) -> impl Fn(Error) -> SimError + '_ {
    move |e| SimError::schema(field, e.to_string())
}

pub(crate) fn check_disturbance_set(w: &Polytope, nx: usize, field: &str) -> Result<(), SimError> {
    if w.dim() != nx {
        return Err(SimError::schema(field, format!("dimension {} but the state has {nx}", w.dim())));
    }
    if !w.contains(&DVector::zeros(nx), 0.0).map_err(invalid(field))? {
        return Err(SimError::schema(field, "disturbance set must contain the origin"));
    }
    Ok(())
}

impl Scenario {
    /// Same scenario with `steps` steps; events at or beyond the new end
    /// are dropped.
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self.events.retain(|e| e.t < steps);
        self
    }

    /// Schema-level checks: shapes, set validity, event times.
    pub fn parts(&self) -> Result<ScenarioParts, SimError> {
        let a = matrix(&self.system.a, "system.A")?;
        let b = matrix(&self.system.b, "system.B")?;
        let g = matrix(&self.system.g, "system.G")?;
        let sigma_w = matrix(&self.system.sigma_w, "system.sigma_w")?;
        let nx = a.nrows();
        let w = self.system.w.to_polytope("system.W")?;
        check_disturbance_set(&w, nx, "system.W")?;
        let system = LinearSystem::new(a, b, g, sigma_w, w).map_err(invalid("system"))?;
        let config = MpcConfig {
            horizon: self.config.horizon,
            q: matrix(&self.config.q, "config.Q")?,
            r: matrix(&self.config.r, "config.R")?,
            x_ref: DVector::from_column_slice(&self.config.x_ref),
            u_ref: DVector::from_column_slice(&self.config.u_ref),
            dt: self.config.dt,
        };
        config.check_shapes(&system).map_err(invalid("config"))?;
        let x_p = self.x_p.to_polytope("X_P")?;
        if x_p.dim() != nx {
            return Err(SimError::schema("X_P", "dimension differs from the state"));
        }
        let u = self.u.to_polytope("U")?;
        if u.dim() != system.nu() {
            return Err(SimError::schema("U", "dimension differs from the input"));
        }
        if self.x0.len() != nx {
            return Err(SimError::schema("x0", "dimension differs from the state"));
        }
        if self.steps == 0 {
            return Err(SimError::schema("steps", "must be ≥ 1"));
        }
        if self.method == Method::Montecarlo && self.mc_samples < crate::probability::MIN_SAMPLES {
            return Err(SimError::schema("mc_samples", "too few samples"));
        }
        for (i, ev) in self.events.iter().enumerate() {
            let field = format!("events[{i}]");
            if ev.t >= self.steps {
                return Err(SimError::schema(&field, format!("time {} outside [0, {})", ev.t, self.steps)));
            }
            match &ev.event {
                Event::UnmodeledDisturbance { w_extra } => {
                    if w_extra.len() != system.nw() {
                        return Err(SimError::schema(&field, "w_extra has the wrong length"));
                    }
                }
                Event::UpdateDisturbanceSet { w, sigma_w, .. } => {
                    let wp = w.to_polytope(&field)?;
                    check_disturbance_set(&wp, nx, &field)?;
                    let s = matrix(sigma_w, &field)?;
                    if s.shape() != (nx, nx) {
                        return Err(SimError::schema(&field, "sigma_w has the wrong shape"));
                    }
                }
                Event::UpdateStateConstraints { x_p, .. } => {
                    if x_p.to_polytope(&field)?.dim() != nx {
                        return Err(SimError::schema(&field, "X_P has the wrong dimension"));
                    }
                }
            }
        }
        Ok(ScenarioParts {
            system,
            config,
            x_p,
            u,
            x0: DVector::from_column_slice(&self.x0),
        })
    }

    /// Builds the controller; a violated assumption is reported with its id.
    pub fn build_problem(&self) -> Result<CvpmProblem, SimError> {
        let p = self.parts()?;
        CvpmProblem::new(p.system, p.config, p.x_p, p.u).map_err(SimError::from_build)
    }

    pub fn assumption_report(&self) -> Result<AssumptionReport, SimError> {
        let p = self.parts()?;
        validate_assumptions(&p.system, &p.config, &p.x_p, &p.u).map_err(SimError::from_build)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

}

/// Parses and validates a scenario file. Syntax errors, schema violations
/// and failed assumptions are reported as distinct error kinds.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, SimError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(path.display().to_string(), e))?;
    let scenario = parse_scenario(&text)?;
    scenario.build_problem()?;
    Ok(scenario)
}

/// Parses without building the controller.
pub fn parse_scenario(text: &str) -> Result<Scenario, SimError> {
    let scenario: Scenario = serde_json::from_str(text).map_err(SimError::from_json)?;
    scenario.parts()?;
    Ok(scenario)
}
