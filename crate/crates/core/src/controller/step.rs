use nalgebra::{DMatrix, DVector};

use super::problem::CvpmProblem;
use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;
use crate::optimizers::{ActiveSetSolver, QpProblem, QpSolution, StatusKind};

/// Width of the band around the boundary of `X_C1` inside which the set
/// membership test and the input-feasibility LP may disagree.
pub const BOUNDARY_BAND: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Case {
    Safe,
    Probabilistic,
}

impl Case {
    pub fn as_str(self) -> &'static str {
        match self {
            Case::Safe => "safe",
            Case::Probabilistic => "probabilistic",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    pub qp_iterations: usize,
    pub kkt_residual: f64,
    pub active_set_size: usize,
    pub regularized: bool,
    /// Case 2 targeted the constraint set because `X_C1` is empty.
    pub fallback: bool,
    /// Sampling-based solve hit its evaluation budget.
    pub budget_exhausted: bool,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub case: Case,
    pub u_applied: DVector<f64>,
    pub u_star: DVector<f64>,
    pub x_bar: DVector<f64>,
    pub xi_star: Option<DVector<f64>>,
    pub p_violation: f64,
    /// Case 1: the MPC cost. Case 2: the adapted Mahalanobis distance.
    pub objective: f64,
    pub diagnostics: StepDiagnostics,
}

/// Warm-start state carried between controller steps. Single owner.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    case1: ActiveSetSolver,
    case2: ActiveSetSolver,
}

impl Workspace {
    pub fn reset(&mut self) {
        self.case1.clear();
        self.case2.clear();
    }
}

impl CvpmProblem {
    /// Input sequences (original coordinates) that keep the whole tube
    /// inside the constraints from state `x`.
    pub fn admissible_input_polytope(&self, x: &DVector<f64>) -> Result<Polytope> {
        let shifted = self.admissible_shifted(x)?;
        let u_s = DVector::from_iterator(
            self.horizon() * self.nu(),
            (0..self.horizon()).flat_map(|_| self.target.u.iter().copied()),
        );
        shifted.translate(&u_s)
    }

    fn admissible_shifted(&self, x: &DVector<f64>) -> Result<Polytope> {
        check_dim(self.nx(), x.len())?;
        let dx = self.shift_state(x);
        let tube_f = self.tube.f();
        let u_box = self.stacked_inputs();
        let f_t = tube_f * &self.lifted.b_lift;
        let g_t = self.tube.g() - tube_f * (&self.lifted.a_lift * dx);
        let tube_rows = Polytope::new(f_t, g_t)?;
        u_box.intersect(&tube_rows)
    }

    /// Safe iff some admissible input sequence exists. The LP decides; the
    /// explicit `X_C1` must agree outside a thin boundary band.
    pub fn detect_case(&self, x: &DVector<f64>) -> Result<Case> {
        let lp_safe = !self.admissible_shifted(x)?.is_empty()?;
        if self.x_c1_empty {
            return if lp_safe {
                Err(Error::Inconsistency(
                    "admissible inputs exist although X_C1 is empty".into(),
                ))
            } else {
                Ok(Case::Probabilistic)
            };
        }
        let violation = self.x_c1.normalized().max_violation(&self.shift_state(x))?;
        let set_safe = violation <= 0.0;
        if lp_safe != set_safe && violation.abs() > BOUNDARY_BAND {
            return Err(Error::Inconsistency(format!(
                "case tests disagree at x = {:?} (X_C1 violation {violation:.3e})",
                x.as_slice()
            )));
        }
        Ok(if lp_safe { Case::Safe } else { Case::Probabilistic })
    }

    /// Condensed Case-1 QP in shifted coordinates and its constant term.
    fn case1_qp(&self, x: &DVector<f64>) -> Result<(QpProblem, f64)> {
        let dx = self.shift_state(x);
        let (h, f, c) = self.case1_cost(&dx);
        let adm = self.admissible_shifted(x)?;
        Ok((QpProblem::new(h, f, adm.f().clone(), adm.g().clone())?, c))
    }

    /// `J(U) = ½UᵀHU + fᵀU + c` for the shifted state `dx`.
    fn case1_cost(&self, dx: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, f64) {
        let n = self.horizon();
        let nx = self.nx();
        let l = &self.lifted;
        let mut qbar = DMatrix::zeros(n * nx, n * nx);
        for k in 0..n {
            let blk = if k + 1 == n { &self.p } else { &self.config.q };
            qbar.view_mut((k * nx, k * nx), (nx, nx)).copy_from(blk);
        }
        let nu = self.nu();
        let mut rbar = DMatrix::zeros(n * nu, n * nu);
        for k in 0..n {
            rbar.view_mut((k * nu, k * nu), (nu, nu))
                .copy_from(&self.config.r);
        }
        let bt_q = l.b_lift.transpose() * &qbar;
        let h = (&bt_q * &l.b_lift + &rbar) * 2.0;
        let h = (&h + h.transpose()) * 0.5;
        let ax = &l.a_lift * dx;
        let f = &bt_q * &ax * 2.0;
        let c = dx.dot(&(&self.config.q * dx)) + ax.dot(&(&qbar * &ax));
        (h, f, c)
    }

    /// Mean trajectory in original coordinates.
    fn absolute_trajectory(&self, shifted: &DVector<f64>, step: &DVector<f64>) -> DVector<f64> {
        let d = step.len();
        DVector::from_fn(shifted.len(), |i, _| shifted[i] + step[i % d])
    }

    fn finish_inputs(&self, du: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let u_star = self.absolute_trajectory(du, &self.target.u);
        let u_applied = u_star.rows(0, self.nu()).into_owned();
        (u_star, u_applied)
    }

    pub fn solve_case1(&self, x: &DVector<f64>, ws: &mut Workspace) -> Result<StepOutcome> {
        let (qp, c) = self.case1_qp(x)?;
        let sol = ws.case1.solve(&qp)?;
        if sol.status.kind != StatusKind::Optimal {
            return Err(Error::Inconsistency(format!(
                "Case-1 QP reported {:?} at x = {:?}",
                sol.status.kind,
                x.as_slice()
            )));
        }
        let dx = self.shift_state(x);
        let (u_star, u_applied) = self.finish_inputs(&sol.z);
        let x_bar_shifted = self.lifted.predict_mean(&dx, &sol.z)?;
        Ok(StepOutcome {
            case: Case::Safe,
            u_applied,
            u_star,
            x_bar: self.absolute_trajectory(&x_bar_shifted, &self.target.x),
            xi_star: None,
            p_violation: 0.0,
            objective: (sol.objective + c).max(0.0),
            diagnostics: diagnostics(&sol),
        })
    }

    /// Target set for ξ (shifted) and the covariance for the objective.
    fn case2_target(&self) -> (Polytope, bool) {
        if self.x_c1_empty {
            (self.augmented.clone(), true)
        } else {
            let t = self
                .x_c1
                .cartesian_power(self.horizon())
                .expect("horizon ≥ 1");
            (t, false)
        }
    }

    /// `min (X̄ − ξ)ᵀ Σ̲⁻¹ (X̄ − ξ)` over `(U, ξ)`.
    pub fn solve_case2(&self, x: &DVector<f64>, ws: &mut Workspace) -> Result<StepOutcome> {
        check_dim(self.nx(), x.len())?;
        let dx = self.shift_state(x);
        let (target, fallback) = self.case2_target();
        let cov = if fallback { &self.cov_plain } else { &self.cov_adapted };
        let m = cov.assemble();
        let l = &self.lifted;
        let nuu = self.horizon() * self.nu();
        let nxx = self.horizon() * self.nx();
        let mut d = DMatrix::zeros(nxx, nuu + nxx);
        d.view_mut((0, 0), (nxx, nuu)).copy_from(&l.b_lift);
        d.view_mut((0, nuu), (nxx, nxx))
            .copy_from(&(-DMatrix::identity(nxx, nxx)));
        let ax = &l.a_lift * &dx;
        let dt_m = d.transpose() * &m;
        let h = &dt_m * &d * 2.0;
        let h = (&h + h.transpose()) * 0.5;
        let f = &dt_m * &ax * 2.0;

        let u_box = self.stacked_inputs();
        let rows = u_box.n_rows() + target.n_rows();
        let mut g = DMatrix::zeros(rows, nuu + nxx);
        g.view_mut((0, 0), (u_box.n_rows(), nuu)).copy_from(u_box.f());
        g.view_mut((u_box.n_rows(), nuu), (target.n_rows(), nxx))
            .copy_from(target.f());
        let mut hv = DVector::zeros(rows);
        hv.rows_mut(0, u_box.n_rows()).copy_from(u_box.g());
        hv.rows_mut(u_box.n_rows(), target.n_rows()).copy_from(target.g());
        let qp = QpProblem::new(h, f, g, hv)?;
        let sol = ws.case2.solve(&qp)?;
        if sol.status.kind != StatusKind::Optimal {
            return Err(Error::Solver(format!(
                "Case-2 QP reported {:?}",
                sol.status.kind
            )));
        }
        let du = sol.z.rows(0, nuu).into_owned();
        let xi = sol.z.rows(nuu, nxx).into_owned();
        let x_bar_shifted = l.predict_mean(&dx, &du)?;
        let objective = cov.mahalanobis(&(&x_bar_shifted - &xi))?;
        let (u_star, u_applied) = self.finish_inputs(&du);
        let x_bar = self.absolute_trajectory(&x_bar_shifted, &self.target.x);
        let xi_star = self.absolute_trajectory(&xi, &self.target.x);
        let p_violation = self.approx_violation_probability(&x_bar, &xi_star)?;
        let mut diag = diagnostics(&sol);
        diag.fallback = fallback;
        Ok(StepOutcome {
            case: Case::Probabilistic,
            u_applied,
            u_star,
            x_bar,
            xi_star: Some(xi_star),
            p_violation,
            objective,
            diagnostics: diag,
        })
    }

    /// `1 − c′·exp(−½ d)·V^N` clamped to `[0, 1]`, with `d` the Mahalanobis
    /// distance under the plain block covariance and
    /// `c′ = ((2π)^{n_x N} det Σ̲)^{−1/2}`. Evaluated in log space.
    /// NaN when the state dimension is above 2 (no volume available).
    pub fn approx_violation_probability(
        &self,
        x_bar: &DVector<f64>,
        xi: &DVector<f64>,
    ) -> Result<f64> {
        let nxx = self.horizon() * self.nx();
        check_dim(nxx, x_bar.len())?;
        check_dim(nxx, xi.len())?;
        if self.nx() > 2 {
            return Ok(f64::NAN);
        }
        let d = self.cov_plain.mahalanobis(&(x_bar - xi))?;
        let log_c = -0.5
            * (nxx as f64 * (2.0 * std::f64::consts::PI).ln() + self.cov_plain.log_det_covariance()?);
        let log_v = if self.x_c1_empty {
            self.target_volume.ln()
        } else {
            self.horizon() as f64 * self.x_c1_volume.ln()
        };
        let log_mass = log_c - 0.5 * d + log_v;
        let mass = if log_mass >= 0.0 { 1.0 } else { log_mass.exp() };
        Ok(1.0 - mass.clamp(0.0, 1.0))
    }

    /// One controller step with warm starts from `ws`.
    pub fn step(&self, x: &DVector<f64>, ws: &mut Workspace) -> Result<StepOutcome> {
        match self.detect_case(x)? {
            Case::Safe => self.solve_case1(x, ws),
            Case::Probabilistic => self.solve_case2(x, ws),
        }
    }

    /// Case 1: optimal MPC cost. Case 2: optimal adapted Mahalanobis value.
    pub fn lyapunov_value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(cvpm_step(self, x)?.objective)
    }

    /// Minimum slack of `Ā x + B̄ U ⊕ Ḡ∘W^N ⊆ X_P^{N−1} × X_f` for an input
    /// sequence `u` in original coordinates. Uses the per-block support sums,
    /// not the tube polytope.
    pub fn zero_violation_slack(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
        check_dim(self.horizon() * self.nu(), u.len())?;
        let dx = self.shift_state(x);
        let u_s = DVector::from_iterator(
            u.len(),
            (0..self.horizon()).flat_map(|_| self.target.u.iter().copied()),
        );
        let mean = self.lifted.predict_mean(&dx, &(u - u_s))?;
        let aug = self.augmented.f();
        let mut slack = f64::INFINITY;
        for i in 0..aug.nrows() {
            let norm = aug.row(i).norm();
            let s = self.augmented.g()[i] - aug.row(i).dot(&mean.transpose()) - self.tightening[i];
            slack = slack.min(s / norm);
        }
        Ok(slack)
    }
}

fn diagnostics(sol: &QpSolution) -> StepDiagnostics {
    StepDiagnostics {
        qp_iterations: sol.status.iterations,
        kkt_residual: sol.kkt_residual,
        active_set_size: sol.working_set.len(),
        regularized: sol.regularized,
        ..Default::default()
    }
}

/// Stateless controller step.
pub fn cvpm_step(problem: &CvpmProblem, x: &DVector<f64>) -> Result<StepOutcome> {
    problem.step(x, &mut Workspace::default())
}
