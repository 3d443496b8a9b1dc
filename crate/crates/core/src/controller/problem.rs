use log::warn;
use nalgebra::{DMatrix, DVector};

use super::system::{steady_state_target, LinearSystem, MpcConfig, SteadyStateTarget};
use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::lifting::{block_cov_inverse, build_lifted, BlockCovariance, LiftedSystem};
use crate::linalg::{
    dare_residual, is_positive_definite, lqr_gain, solve_dlyap, spectral_radius,
};

/// Facet-wise set comparisons accept this much negative slack.
pub const SLACK_TOL: f64 = 1e-8;
const TERMINAL_MAX_ITER: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub evidence: String,
}

/// Vertex check of `x ∈ X_C1 ⇒ (A − BK)x + Gw ∈ X_C1, −Kx ∈ U` over the
/// vertices of `X_C1` and `W`. Reported, never assumed.
#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceDiagnostic {
    pub checked: usize,
    pub failures: usize,
    pub worst_violation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub target: Option<SteadyStateTarget>,
    /// Minimum facet slack of the terminal-set inclusion certificate.
    pub rci_slack: Option<f64>,
    pub lqr_invariance: Option<InvarianceDiagnostic>,
    pub warnings: Vec<String>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.len() == 6 && self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn check(&self, id: u8) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }

    fn push(&mut self, id: u8, name: &'static str, passed: bool, evidence: String) {
        self.checks.push(AssumptionCheck {
            id,
            name,
            passed,
            evidence,
        });
    }

    fn to_error(&self) -> Option<Error> {
        self.first_failure().map(|c| Error::Assumption {
            assumption: c.id,
            detail: format!("{}: {}", c.name, c.evidence),
        })
    }
}

/// How the terminal set is obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum TerminalSet {
    Compute,
    /// A set in original coordinates, kept fixed; only its certificate reruns.
    Pinned(Polytope),
}

/// Precomputed controller data. All sets except `x_p`, `u_set` and `w` live
/// in coordinates shifted by the steady-state target.
#[derive(Clone, Debug)]
pub struct CvpmProblem {
    pub system: LinearSystem,
    pub config: MpcConfig,
    pub target: SteadyStateTarget,
    pub x_p: Polytope,
    pub u_set: Polytope,
    pub x_p_shifted: Polytope,
    pub u_shifted: Polytope,
    pub lifted: LiftedSystem,
    pub x_f: Polytope,
    /// `X_P^{N−1} × X_f`, shifted.
    pub augmented: Polytope,
    /// Support of `Ḡ∘W^N` along each row of `augmented`, from per-block sums.
    pub tightening: DVector<f64>,
    /// `augmented ⊖ Ḡ∘W^N`.
    pub tube: Polytope,
    /// Empty after runtime updates that break the tightening assumption.
    pub x_c1: Polytope,
    pub x_c1_empty: bool,
    pub x_c1_volume: f64,
    pub target_volume: f64,
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub sigma_x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub cov_plain: BlockCovariance,
    pub cov_adapted: BlockCovariance,
    pub report: AssumptionReport,
}

fn stacked_box_rows(u: &Polytope, horizon: usize) -> Result<Polytope> {
    u.cartesian_power(horizon)
}

/// `h_W(Gᵀ(Aʲ)ᵀ f)` summed over the blocks that reach step `k` (1-based).
fn block_tightening(
    system: &LinearSystem,
    f: &DVector<f64>,
    k: usize,
) -> Result<f64> {
    let mut total = 0.0;
    let mut d = f.clone();
    for _ in 0..k {
        total += system.w.support(&(system.g.transpose() * &d))?;
        d = system.a.transpose() * d;
    }
    Ok(total)
}

/// One Pre-step: `((Ω ⊖ A^N G∘W) ⊕ (−B)∘U) ∘ A`, intersected with `X_P`.
fn terminal_step(
    system: &LinearSystem,
    x_p: &Polytope,
    an_gw: &Polytope,
    minus_bu: &Polytope,
    omega: &Polytope,
) -> Result<Option<Polytope>> {
    let tight = omega.pontryagin_diff(an_gw)?;
    if tight.is_empty()? {
        return Ok(None);
    }
    let tight = tight.remove_redundancy()?;
    let grown = tight.minkowski_sum(minus_bu)?;
    let next = x_p.intersect(&grown.affine_preimage(&system.a)?)?;
    if next.is_empty()? {
        return Ok(None);
    }
    Ok(Some(next.remove_redundancy()?))
}

/// Robust control invariant terminal set in shifted coordinates.
pub fn compute_terminal_set(
    system: &LinearSystem,
    horizon: usize,
    x_p: &Polytope,
    u: &Polytope,
) -> Result<Polytope> {
    if system.nx() > 3 {
        return Err(Error::Unsupported(
            "terminal-set iteration needs explicit Minkowski sums (state dimension ≤ 3)".into(),
        ));
    }
    let an = system.a.pow(horizon as u32);
    let an_gw = system.w.affine_image(&(&an * &system.g))?;
    let minus_bu = u.affine_image(&(-&system.b))?;
    let mut omega = x_p.remove_redundancy()?;
    for _ in 0..TERMINAL_MAX_ITER {
        let Some(next) = terminal_step(system, x_p, &an_gw, &minus_bu, &omega)? else {
            return Err(Error::NoTerminalSet);
        };
        if next.set_eq(&omega, SLACK_TOL)? {
            return Ok(next);
        }
        omega = next;
    }
    Err(Error::ResourceLimit(format!(
        "terminal set did not converge in {TERMINAL_MAX_ITER} iterations"
    )))
}

/// Minimum slack of `A∘X_f ⊕ A^N G∘W ⊆ X_f ⊕ (−B)∘U` over the facets of the
/// right-hand side.
pub fn rci_slack(system: &LinearSystem, horizon: usize, x_f: &Polytope, u: &Polytope) -> Result<f64> {
    let an_g = system.a.pow(horizon as u32) * &system.g;
    let rhs = x_f
        .minkowski_sum(&u.affine_image(&(-&system.b))?)?
        .remove_redundancy()?;
    let mut slack = f64::INFINITY;
    for i in 0..rhs.n_rows() {
        let f = rhs.f().row(i).transpose();
        let lhs = x_f.support(&(system.a.transpose() * &f))?
            + system.w.support(&(an_g.transpose() * &f))?;
        slack = slack.min(rhs.g()[i] - lhs);
    }
    Ok(slack)
}

fn volume(p: &Polytope) -> Result<f64> {
    match p.dim() {
        1 => {
            let (lo, hi) = p.bounding_box()?;
            Ok((hi[0] - lo[0]).max(0.0))
        }
        2 => p.volume_2d(),
        _ => Ok(f64::NAN),
    }
}

/// Lifted `{(x, U) : U ∈ U^N, Ā x + B̄ U ∈ tube}` projected onto `x`.
pub fn compute_case1_set(
    lifted: &LiftedSystem,
    tube: &Polytope,
    u_stacked: &Polytope,
) -> Result<Polytope> {
    let nx = lifted.nx;
    let nuu = lifted.horizon * lifted.nu;
    let (mt, mu) = (tube.n_rows(), u_stacked.n_rows());
    let mut f = DMatrix::zeros(mt + mu, nx + nuu);
    f.view_mut((0, 0), (mt, nx))
        .copy_from(&(tube.f() * &lifted.a_lift));
    f.view_mut((0, nx), (mt, nuu))
        .copy_from(&(tube.f() * &lifted.b_lift));
    f.view_mut((mt, nx), (mu, nuu)).copy_from(u_stacked.f());
    let mut g = DVector::zeros(mt + mu);
    g.rows_mut(0, mt).copy_from(tube.g());
    g.rows_mut(mt, mu).copy_from(u_stacked.g());
    let joint = Polytope::new(f, g)?;
    joint.project(&(0..nx).collect::<Vec<_>>())
}

struct Prelude {
    target: SteadyStateTarget,
    x_p_shifted: Polytope,
    u_shifted: Polytope,
    lifted: LiftedSystem,
    p: DMatrix<f64>,
    k: DMatrix<f64>,
    sigma_x: DMatrix<f64>,
    s: DMatrix<f64>,
}

fn evidence_fail(report: &mut AssumptionReport, id: u8, name: &'static str, e: &Error) {
    report.push(id, name, false, e.to_string());
}

const NAMES: [&str; 6] = [
    "truncated Gaussian disturbance",
    "bounded state constraints containing the reference",
    "propagated disturbances fit the state constraints",
    "Schur-stable system matrix",
    "positive definite weights and Riccati terminal cost",
    "robust control invariant terminal set",
];

/// Assumptions 1, 2, 4 and 5 plus the quantities they certify.
fn prelude(
    system: &LinearSystem,
    config: &MpcConfig,
    x_p: &Polytope,
    u_set: &Polytope,
    report: &mut AssumptionReport,
) -> Result<Option<Prelude>> {
    config.check_shapes(system)?;
    crate::error::check_dim(system.nx(), x_p.dim())?;
    crate::error::check_dim(system.nu(), u_set.dim())?;
    let nx = system.nx();

    // Ass. 1
    let sigma_pd = is_positive_definite(&system.sigma_w);
    let w_zero = system.w.contains(&DVector::zeros(nx), 1e-12)?;
    let w_bounded = system.w.bounding_box();
    match &w_bounded {
        Ok((lo, hi)) => report.push(
            1,
            NAMES[0],
            sigma_pd && w_zero,
            format!(
                "Σ_w positive definite: {sigma_pd}; 0 ∈ W: {w_zero}; W ⊆ [{:?}, {:?}]",
                lo.as_slice(),
                hi.as_slice()
            ),
        ),
        Err(e) => evidence_fail(report, 1, NAMES[0], e),
    }

    // Ass. 2 and the reference shift.
    let target = match steady_state_target(system, config) {
        Ok(t) => t,
        Err(e) => {
            evidence_fail(report, 2, NAMES[1], &e);
            return Ok(None);
        }
    };
    if target.adjusted {
        let msg = format!(
            "references are not an equilibrium (‖A x_ref + B u_ref − x_ref‖ = {:.3e}); \
             tracking the nearest equilibrium x = {:?}, u = {:?}",
            target.reference_residual,
            target.x.as_slice(),
            target.u.as_slice()
        );
        warn!("{msg}");
        report.warnings.push(msg);
    }
    let bounded = x_p.bounding_box();
    let ref_in = x_p.contains(&config.x_ref, 1e-12)?;
    let target_in = x_p.max_violation(&target.x)? < 0.0;
    let u_in = u_set.max_violation(&target.u)? <= 0.0 && u_set.bounding_box().is_ok();
    report.target = Some(target.clone());
    match &bounded {
        Ok(_) => report.push(
            2,
            NAMES[1],
            ref_in && target_in && u_in,
            format!(
                "X_P bounded; x_ref ∈ X_P: {ref_in}; target state interior to X_P: {target_in}; \
                 target input in U: {u_in}"
            ),
        ),
        Err(e) => evidence_fail(report, 2, NAMES[1], e),
    }

    // Ass. 4
    let rho = spectral_radius(&system.a)?;
    report.push(4, NAMES[3], rho < 1.0, format!("ρ(A) = {rho:.12}"));

    // Ass. 5
    let q_pd = is_positive_definite(&config.q);
    let r_pd = is_positive_definite(&config.r);
    let gain = if q_pd && r_pd {
        lqr_gain(&system.a, &system.b, &config.q, &config.r).ok()
    } else {
        None
    };
    match &gain {
        Some((_, p)) => {
            let res = dare_residual(&system.a, &system.b, &config.q, &config.r, p);
            report.push(
                5,
                NAMES[4],
                res <= 1e-8,
                format!("Q, R positive definite; DARE residual {res:.3e}"),
            );
        }
        None => report.push(
            5,
            NAMES[4],
            false,
            format!("Q positive definite: {q_pd}; R positive definite: {r_pd}; no stabilizing DARE solution"),
        ),
    }

    if !report.checks.iter().all(|c| c.passed) {
        return Ok(None);
    }
    let (k, p) = gain.expect("checked above");
    let gsg = &system.g * &system.sigma_w * system.g.transpose();
    let sigma_x = solve_dlyap(&system.a, &gsg)?;
    let acl = &system.a - &system.b * &k;
    let sigma_inv = sigma_x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("Σ_x is singular".into()))?;
    let s = solve_dlyap(&acl.transpose(), &((&sigma_inv + sigma_inv.transpose()) * 0.5))?;
    Ok(Some(Prelude {
        x_p_shifted: x_p.translate(&(-&target.x))?,
        u_shifted: u_set.translate(&(-&target.u))?,
        lifted: build_lifted(&system.a, &system.b, &system.g, config.horizon)?,
        target,
        p,
        k,
        sigma_x,
        s,
    }))
}

/// Assumption 3 over `X_P^N`, by per-block support sums.
fn check_tightening(system: &LinearSystem, horizon: usize, x_p: &Polytope) -> Result<f64> {
    let p = x_p.normalized();
    let mut slack = f64::INFINITY;
    for k in 1..=horizon {
        for i in 0..p.n_rows() {
            let f = p.f().row(i).transpose();
            slack = slack.min(p.g()[i] - block_tightening(system, &f, k)?);
        }
    }
    Ok(slack)
}

impl CvpmProblem {
    /// Builds the controller; fails on the first violated assumption.
    pub fn new(
        system: LinearSystem,
        config: MpcConfig,
        x_p: Polytope,
        u_set: Polytope,
    ) -> Result<Self> {
        Self::build(system, config, x_p, u_set, TerminalSet::Compute, true)
    }

    /// With `strict = false`, a failed tightening or terminal certificate is
    /// reported and the problem is still built (X_C1 may then be empty and
    /// the controller stays in the probabilistic case).
    pub fn build(
        system: LinearSystem,
        config: MpcConfig,
        x_p: Polytope,
        u_set: Polytope,
        terminal: TerminalSet,
        strict: bool,
    ) -> Result<Self> {
        let mut report = AssumptionReport {
            checks: Vec::new(),
            target: None,
            rci_slack: None,
            lqr_invariance: None,
            warnings: Vec::new(),
        };
        let Some(pre) = prelude(&system, &config, &x_p, &u_set, &mut report)? else {
            report.checks.sort_by_key(|c| c.id);
            return Err(report.to_error().expect("prelude failed without a failed check"));
        };
        let horizon = config.horizon;
        let x_p_shifted = pre.x_p_shifted.normalized();

        // Ass. 3
        let slack3 = check_tightening(&system, horizon, &x_p_shifted)?;
        report.push(
            3,
            NAMES[2],
            slack3 > 0.0,
            format!("min facet slack of Ḡ∘W^N inside X_P^N: {slack3:.6e}"),
        );

        // Ass. 6
        let x_f = match &terminal {
            TerminalSet::Compute => {
                if slack3 > 0.0 {
                    compute_terminal_set(&system, horizon, &x_p_shifted, &pre.u_shifted)
                } else {
                    Err(Error::NoTerminalSet)
                }
            }
            TerminalSet::Pinned(xf) => xf.translate(&(-&pre.target.x)),
        };
        let x_f = match x_f {
            Ok(xf) => {
                let inside = x_p_shifted.inclusion_slack(&xf)?;
                let rci = rci_slack(&system, horizon, &xf, &pre.u_shifted)?;
                report.rci_slack = Some(rci);
                report.push(
                    6,
                    NAMES[5],
                    inside >= -SLACK_TOL && rci >= -SLACK_TOL,
                    format!("X_f ⊆ X_P slack {inside:.3e}; invariance inclusion slack {rci:.3e}"),
                );
                Some(xf)
            }
            Err(e) => {
                evidence_fail(&mut report, 6, NAMES[5], &e);
                None
            }
        };
        report.checks.sort_by_key(|c| c.id);
        if strict {
            if let Some(e) = report.to_error() {
                return Err(e);
            }
        }
        // Without any terminal set the original constraints take its place.
        let x_f = x_f.unwrap_or_else(|| x_p_shifted.clone());

        let augmented = if horizon == 1 {
            x_f.clone()
        } else {
            x_p_shifted.cartesian_power(horizon - 1)?.cartesian_product(&x_f)
        };
        let nx = system.nx();
        let mut tightening = DVector::zeros(augmented.n_rows());
        for i in 0..augmented.n_rows() {
            let row = augmented.f().row(i);
            let block = (0..horizon)
                .find(|&k| row.columns(k * nx, nx).amax() > 0.0)
                .unwrap_or(horizon - 1);
            let f = row.columns(block * nx, nx).transpose();
            tightening[i] = block_tightening(&system, &f, block + 1)?;
        }

        let w_n = system.w.cartesian_power(horizon)?;
        let gw_n = w_n.affine_image(&pre.lifted.g_lift)?;
        let tube = augmented.pontryagin_diff(&gw_n)?;
        // The LP route and the per-block sums must agree.
        let gap = (augmented.g() - &tightening - tube.g()).amax();
        if gap > 1e-7 {
            return Err(Error::Inconsistency(format!(
                "tube tightening routes disagree by {gap:.3e}"
            )));
        }

        let u_stacked = stacked_box_rows(&pre.u_shifted, horizon)?;
        let tube_empty = tube.is_empty()?;
        let x_c1 = if tube_empty {
            Polytope::empty(nx)
        } else {
            compute_case1_set(&pre.lifted, &tube, &u_stacked)?
        };
        let x_c1_empty = x_c1.is_empty()?;
        if x_c1_empty {
            let msg = "X_C1 is empty; the controller will stay in the probabilistic case".to_string();
            warn!("{msg}");
            report.warnings.push(msg);
        }
        let x_c1_volume = if x_c1_empty { 0.0 } else { volume(&x_c1)? };
        let target_volume =
            volume(&x_p_shifted)?.powi(horizon as i32 - 1) * volume(&x_f)?;

        let cov_plain = block_cov_inverse(&pre.sigma_x, &pre.s, horizon, false)?;
        let cov_adapted = block_cov_inverse(&pre.sigma_x, &pre.s, horizon, true)?;

        let mut problem = Self {
            system,
            config,
            target: pre.target,
            x_p,
            u_set,
            x_p_shifted,
            u_shifted: pre.u_shifted,
            lifted: pre.lifted,
            x_f,
            augmented,
            tightening,
            tube,
            x_c1,
            x_c1_empty,
            x_c1_volume,
            target_volume,
            p: pre.p,
            k: pre.k,
            sigma_x: pre.sigma_x,
            s: pre.s,
            cov_plain,
            cov_adapted,
            report,
        };
        problem.report.lqr_invariance = problem.lqr_invariance_check()?;
        if let Some(d) = &problem.report.lqr_invariance {
            if d.failures > 0 {
                let msg = format!(
                    "LQR gain does not keep X_C1 invariant at {} of {} vertex pairs (worst {:.3e})",
                    d.failures, d.checked, d.worst_violation
                );
                warn!("{msg}");
                problem.report.warnings.push(msg);
            }
        }
        Ok(problem)
    }

    pub fn nx(&self) -> usize {
        self.system.nx()
    }

    pub fn nu(&self) -> usize {
        self.system.nu()
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn shift_state(&self, x: &DVector<f64>) -> DVector<f64> {
        x - &self.target.x
    }

    /// Stacked input box `U^N` in shifted coordinates.
    pub fn stacked_inputs(&self) -> Polytope {
        self.u_shifted
            .cartesian_power(self.horizon())
            .expect("horizon ≥ 1")
    }

    pub fn x_c1_absolute(&self) -> Polytope {
        self.x_c1.translate(&self.target.x).expect("dims match")
    }

    pub fn x_f_absolute(&self) -> Polytope {
        self.x_f.translate(&self.target.x).expect("dims match")
    }

    fn lqr_invariance_check(&self) -> Result<Option<InvarianceDiagnostic>> {
        if self.nx() > 3 || self.x_c1_empty {
            return Ok(None);
        }
        let verts = self.x_c1.vertices()?;
        let w_verts = self.system.w.vertices()?;
        let acl = &self.system.a - &self.system.b * &self.k;
        let x_c1 = self.x_c1.normalized();
        let u = self.u_shifted.normalized();
        let mut diag = InvarianceDiagnostic {
            checked: 0,
            failures: 0,
            worst_violation: f64::NEG_INFINITY,
        };
        for v in &verts {
            let input_viol = u.max_violation(&(-&self.k * v))?;
            for w in &w_verts {
                let next = &acl * v + &self.system.g * w;
                let viol = x_c1.max_violation(&next)?.max(input_viol);
                diag.checked += 1;
                diag.worst_violation = diag.worst_violation.max(viol);
                if viol > 1e-7 {
                    diag.failures += 1;
                }
            }
        }
        Ok(Some(diag))
    }

    /// Same controller with a new disturbance description.
    pub fn with_disturbance_set(
        &self,
        w: Polytope,
        sigma_w: DMatrix<f64>,
        recompute_terminal: bool,
    ) -> Result<Self> {
        let system = LinearSystem::new(
            self.system.a.clone(),
            self.system.b.clone(),
            self.system.g.clone(),
            sigma_w,
            w,
        )?;
        self.rebuild(system, self.x_p.clone(), recompute_terminal)
    }

    /// Same controller with new state constraints.
    pub fn with_state_constraints(&self, x_p: Polytope, recompute_terminal: bool) -> Result<Self> {
        self.rebuild(self.system.clone(), x_p, recompute_terminal)
    }

    fn rebuild(&self, system: LinearSystem, x_p: Polytope, recompute_terminal: bool) -> Result<Self> {
        let terminal = if recompute_terminal {
            TerminalSet::Compute
        } else {
            TerminalSet::Pinned(self.x_f_absolute())
        };
        Self::build(
            system,
            self.config.clone(),
            x_p,
            self.u_set.clone(),
            terminal,
            false,
        )
    }
}

/// Runs every check and reports; never fails on a violated assumption.
pub fn validate_assumptions(
    system: &LinearSystem,
    config: &MpcConfig,
    x_p: &Polytope,
    u_set: &Polytope,
) -> Result<AssumptionReport> {
    match CvpmProblem::build(
        system.clone(),
        config.clone(),
        x_p.clone(),
        u_set.clone(),
        TerminalSet::Compute,
        false,
    ) {
        Ok(p) => Ok(p.report),
        Err(Error::Assumption { .. }) => {
            // A prelude failure: rerun it to collect the full evidence.
            let mut report = AssumptionReport {
                checks: Vec::new(),
                target: None,
                rci_slack: None,
                lqr_invariance: None,
                warnings: Vec::new(),
            };
            prelude(system, config, x_p, u_set, &mut report)?;
            for (i, name) in NAMES.iter().enumerate() {
                let id = i as u8 + 1;
                if report.check(id).is_none() {
                    report.push(id, name, false, "not evaluated: an earlier check failed".into());
                }
            }
            report.checks.sort_by_key(|c| c.id);
            Ok(report)
        }
        Err(e) => Err(e),
    }
}
