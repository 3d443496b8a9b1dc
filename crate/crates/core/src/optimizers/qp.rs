//! Primal active-set method for convex quadratic programs.
//!
//! `min ½ zᵀH z + fᵀz  s.t.  G z ≤ h,  A z = b`.
//!
//! A feasible start comes from the caller (warm start) or from a phase-one
//! LP. Each iteration solves the equality-constrained subproblem on the
//! working set through its dense KKT system. Blocking constraints enter with
//! ties broken by lowest index, and the most negative multiplier leaves.
//!
//! Positive semidefinite Hessians get a ridge of `RIDGE` along their null
//! directions only; the returned solution records that it happened.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::lp::{solve_lp, Certificate, LpProblem, SolveStatus, StatusKind};
use crate::error::{check_dim, Error, Result};

pub const RIDGE: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h_ineq: DVector<f64>,
    pub a_eq: Option<DMatrix<f64>>,
    pub b_eq: Option<DVector<f64>>,
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        g: DMatrix<f64>,
        h_ineq: DVector<f64>,
    ) -> Result<Self> {
        let n = f.len();
        check_dim(n, h.nrows())?;
        check_dim(n, h.ncols())?;
        check_dim(n, g.ncols())?;
        check_dim(g.nrows(), h_ineq.len())?;
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-10 * (1.0 + h.amax()) {
            return Err(Error::InvalidInput(format!(
                "Hessian is not symmetric (asymmetry {asym:.3e})"
            )));
        }
        Ok(Self {
            h,
            f,
            g,
            h_ineq,
            a_eq: None,
            b_eq: None,
        })
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim(self.f.len(), a.ncols())?;
        check_dim(a.nrows(), b.len())?;
        self.a_eq = Some(a);
        self.b_eq = Some(b);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.f.dot(z)
    }

    fn n_eq(&self) -> usize {
        self.a_eq.as_ref().map_or(0, |a| a.nrows())
    }

    /// Maximum violation of the inequality and equality rows at `z`.
    pub fn infeasibility(&self, z: &DVector<f64>) -> f64 {
        let mut worst = if self.g.nrows() > 0 {
            (&self.g * z - &self.h_ineq).max().max(0.0)
        } else {
            0.0
        };
        if let (Some(a), Some(b)) = (&self.a_eq, &self.b_eq) {
            worst = worst.max((a * z - b).amax());
        }
        worst
    }
}

/// Largest of the stationarity, primal-feasibility, dual-feasibility and
/// complementarity residuals.
pub fn kkt_residual(
    problem: &QpProblem,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
    mu: &DVector<f64>,
) -> f64 {
    let mut grad = &problem.h * z + &problem.f;
    if problem.g.nrows() > 0 {
        grad += problem.g.transpose() * lambda;
    }
    if let Some(a) = &problem.a_eq {
        grad += a.transpose() * mu;
    }
    let stationarity = grad.amax();
    let primal = problem.infeasibility(z);
    let mut dual = 0.0f64;
    let mut complementarity = 0.0f64;
    for i in 0..problem.g.nrows() {
        dual = dual.max(-lambda[i]);
        let slack = problem.h_ineq[i] - problem.g.row(i).dot(&z.transpose());
        complementarity = complementarity.max((lambda[i] * slack).abs());
    }
    stationarity.max(primal).max(dual).max(complementarity)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QpWarmStart {
    pub z: Option<DVector<f64>>,
    pub working_set: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Inequality rows in the final working set.
    pub working_set: Vec<usize>,
    pub regularized: bool,
    pub kkt_residual: f64,
}

impl QpSolution {
    pub fn lambda(&self) -> Option<&DVector<f64>> {
        self.status.multipliers()
    }

    pub fn warm_start(&self) -> QpWarmStart {
        QpWarmStart {
            z: Some(self.z.clone()),
            working_set: self.working_set.clone(),
        }
    }
}

/// Stateless entry point.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution> {
    ActiveSetSolver::default().solve(problem)
}

/// Active-set solver that carries the previous working set between solves.
#[derive(Clone, Debug, Default)]
pub struct ActiveSetSolver {
    warm: Option<QpWarmStart>,
}

impl ActiveSetSolver {
    pub fn set_warm_start(&mut self, warm: QpWarmStart) {
        self.warm = Some(warm);
    }

    pub fn clear(&mut self) {
        self.warm = None;
    }

    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution> {
        let warm = self.warm.take();
        let sol = solve_from(problem, warm.as_ref())?;
        self.warm = Some(sol.warm_start());
        Ok(sol)
    }
}

fn regularize(h: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((h.clone(), false));
    }
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let scale = eig.eigenvalues.amax().max(1.0);
    let min = eig.eigenvalues.min();
    if min < -1e-9 * scale {
        return Err(Error::InvalidInput(format!(
            "Hessian is not positive semidefinite (eigenvalue {min:.3e})"
        )));
    }
    let threshold = 1e-10 * scale;
    let mut out = sym;
    let mut touched = false;
    for k in 0..n {
        if eig.eigenvalues[k] <= threshold {
            let v = eig.eigenvectors.column(k);
            out += (v * v.transpose()) * (RIDGE - eig.eigenvalues[k].max(0.0));
            touched = true;
        }
    }
    Ok((out, touched))
}

fn phase_one(problem: &QpProblem) -> Result<std::result::Result<DVector<f64>, SolveStatus>> {
    let n = problem.dim();
    let m = problem.g.nrows();
    let me = problem.n_eq();
    let mut g = DMatrix::zeros(m + 2 * me, n);
    let mut h = DVector::zeros(m + 2 * me);
    g.rows_mut(0, m).copy_from(&problem.g);
    h.rows_mut(0, m).copy_from(&problem.h_ineq);
    if let (Some(a), Some(b)) = (&problem.a_eq, &problem.b_eq) {
        g.rows_mut(m, me).copy_from(a);
        g.rows_mut(m + me, me).copy_from(&(-a));
        h.rows_mut(m, me).copy_from(b);
        h.rows_mut(m + me, me).copy_from(&(-b));
    }
    let lp = solve_lp(&LpProblem::feasibility(g, h)?);
    match lp.status.kind {
        StatusKind::Optimal => Ok(Ok(lp.x)),
        StatusKind::Infeasible => {
            let certificate = match lp.status.certificate {
                Certificate::Farkas(y) => Certificate::Farkas(y),
                other => other,
            };
            Ok(Err(SolveStatus {
                kind: StatusKind::Infeasible,
                certificate,
                iterations: lp.status.iterations,
            }))
        }
        _ => Err(Error::Solver(
            "phase-one LP failed while searching for a feasible point".into(),
        )),
    }
}

fn solve_from(problem: &QpProblem, warm: Option<&QpWarmStart>) -> Result<QpSolution> {
    let n = problem.dim();
    let m = problem.g.nrows();
    let me = problem.n_eq();
    let (hreg, regularized) = regularize(&problem.h)?;
    let scale = 1.0 + problem.h_ineq.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut z: Option<DVector<f64>> = None;
    let mut working: Vec<usize> = Vec::new();
    if let Some(ws) = warm {
        if let Some(z0) = &ws.z {
            if z0.len() == n && problem.infeasibility(z0) <= FEAS_TOL * scale {
                z = Some(z0.clone());
                working = ws
                    .working_set
                    .iter()
                    .copied()
                    .filter(|&i| i < m)
                    .collect();
            }
        }
    }
    let mut z = match z {
        Some(z) => z,
        None => match phase_one(problem)? {
            Ok(z) => z,
            Err(status) => {
                return Ok(QpSolution {
                    z: DVector::from_element(n, f64::NAN),
                    objective: f64::NAN,
                    status,
                    working_set: Vec::new(),
                    regularized,
                    kkt_residual: f64::NAN,
                })
            }
        },
    };
    working.retain(|&i| {
        let slack = problem.h_ineq[i] - problem.g.row(i).dot(&z.transpose());
        slack.abs() <= 1e-8 * scale
    });
    working = independent_subset(problem, &working);

    let max_iter = 20 * (n + m) + 200;
    let row_norm: Vec<f64> = (0..m).map(|i| problem.g.row(i).norm()).collect();
    let mut iterations = 0usize;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut lambda_full = DVector::zeros(m);
    let mut mu: DVector<f64>;
    loop {
        if iterations >= max_iter {
            return Err(Error::Solver(format!(
                "active-set QP did not converge in {max_iter} iterations"
            )));
        }
        iterations += 1;
        let grad = &hreg * &z + &problem.f;
        let (p, mult) = solve_eqp(problem, &hreg, &grad, &working)?;
        let pnorm = p.norm();
        // Along ridge directions the subproblem is so flat that `p` carries
        // solve noise; an objective change at rounding level counts as zero.
        let decrease = -(grad.dot(&p) + 0.5 * p.dot(&(&hreg * &p)));
        let flat = decrease.abs() <= 1e-14 * (1.0 + problem.objective(&z).abs());
        if pnorm <= 1e-11 * (1.0 + z.amax()) || flat {
            mu = mult.rows(0, me).into_owned();
            let lam_w = mult.rows(me, working.len()).into_owned();
            let threshold = -1e-11 * (1.0 + grad.amax());
            // Most negative multiplier leaves; lowest row index under Bland.
            let mut leave: Option<usize> = None;
            for (k, &row) in working.iter().enumerate() {
                let l = lam_w[k];
                if l >= threshold {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(b) if bland => row < working[b],
                    Some(b) => l < lam_w[b],
                };
                if better {
                    leave = Some(k);
                }
            }
            match leave {
                None => {
                    lambda_full.fill(0.0);
                    for (k, &row) in working.iter().enumerate() {
                        lambda_full[row] = lam_w[k].max(0.0);
                    }
                    break;
                }
                Some(k) => {
                    working.remove(k);
                }
            }
            continue;
        }

        // Step toward the subproblem minimizer until a constraint blocks.
        // Rows nearly parallel to the step never block: they would make the
        // working set numerically dependent.
        let gp = &problem.g * &p;
        let mut alpha = 1.0f64;
        let mut blocking: Option<usize> = None;
        for i in 0..m {
            if gp[i] <= 1e-10 * row_norm[i] * pnorm || working.contains(&i) {
                continue;
            }
            let slack = (problem.h_ineq[i] - problem.g.row(i).dot(&z.transpose())).max(0.0);
            let step = slack / gp[i];
            let replace = match blocking {
                None => step < alpha,
                Some(b) => {
                    if step < alpha - 1e-14 {
                        true
                    } else if step <= alpha + 1e-14 && !bland {
                        gp[i] / row_norm[i] > gp[b] / row_norm[b]
                    } else {
                        false
                    }
                }
            };
            if replace {
                alpha = step.min(alpha);
                blocking = Some(i);
            }
        }
        z += &p * alpha;
        if let Some(i) = blocking {
            working.push(i);
            if alpha <= 1e-14 {
                degenerate_run += 1;
                if degenerate_run > 2 * n + 10 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
    }

    let objective = problem.objective(&z);
    let residual = kkt_residual(problem, &z, &lambda_full, &mu);
    working.sort_unstable();
    Ok(QpSolution {
        z,
        objective,
        status: SolveStatus {
            kind: StatusKind::Optimal,
            certificate: Certificate::Multipliers {
                inequality: lambda_full,
                equality: mu,
            },
            iterations,
        },
        working_set: working,
        regularized,
        kkt_residual: residual,
    })
}

/// Greedy selection of linearly independent working rows (equalities first).
fn independent_subset(problem: &QpProblem, rows: &[usize]) -> Vec<usize> {
    let n = problem.dim();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut push = |v: DVector<f64>| -> bool {
        let mut r = v.clone();
        for b in &basis {
            let c = r.dot(b);
            r -= b * c;
        }
        let norm = r.norm();
        if norm > 1e-9 * v.norm().max(1e-300) {
            basis.push(r / norm);
            true
        } else {
            false
        }
    };
    if let Some(a) = &problem.a_eq {
        for i in 0..a.nrows() {
            push(a.row(i).transpose());
        }
    }
    let mut out = Vec::new();
    for &i in rows {
        if out.len() + problem.n_eq() >= n {
            break;
        }
        if push(problem.g.row(i).transpose()) {
            out.push(i);
        }
    }
    out
}

/// Solve the equality-constrained step problem; returns the step and the
/// multipliers (equalities first, then working rows).
fn solve_eqp(
    problem: &QpProblem,
    h: &DMatrix<f64>,
    grad: &DVector<f64>,
    working: &[usize],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = problem.dim();
    let me = problem.n_eq();
    let k = me + working.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-grad));
    if let Some(a) = &problem.a_eq {
        for i in 0..me {
            for j in 0..n {
                kkt[(n + i, j)] = a[(i, j)];
                kkt[(j, n + i)] = a[(i, j)];
            }
        }
    }
    for (w, &row) in working.iter().enumerate() {
        for j in 0..n {
            let v = problem.g[(row, j)];
            kkt[(n + me + w, j)] = v;
            kkt[(j, n + me + w)] = v;
        }
    }
    let lu = kkt.clone().full_piv_lu();
    let Some(mut sol) = lu.solve(&rhs) else {
        return Err(Error::Solver("singular KKT system in active-set QP".into()));
    };
    // One step of iterative refinement.
    let resid = &rhs - &kkt * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    let p = sol.rows(0, n).into_owned();
    let mult = sol.rows(n, k).into_owned();
    Ok((p, mult))
}
