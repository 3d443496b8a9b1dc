//! Dense simplex for inequality-form linear programs.
//!
//! The primal problem is `min cᵀx  s.t.  G x ≤ h` with `x` free. Rather than
//! adding slacks and splitting free variables, the solver runs a two-phase
//! revised simplex on the standard-form dual
//!
//! ```text
//! min hᵀy   s.t.   Gᵀy = −c,   y ≥ 0
//! ```
//!
//! whose basis is only `n × n` (n = number of primal variables). This is the
//! right shape for the polytope workloads here: few variables, many rows.
//! The simplex multipliers of an optimal dual basis are the primal solution,
//! and an unbounded dual ray is exactly a Farkas certificate of primal
//! infeasibility.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule for the rest of the phase, which rules out cycling.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 30;

/// `min cᵀx  s.t.  G x ≤ h`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl LpProblem {
    pub fn new(c: DVector<f64>, g: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        check_dim(g.ncols(), c.len())?;
        check_dim(g.nrows(), h.len())?;
        Ok(Self { c, g, h })
    }

    /// Feasibility problem for `{x : G x ≤ h}`.
    pub fn feasibility(g: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        let n = g.ncols();
        Self::new(DVector::zeros(n), g, h)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StatusKind {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Certificate {
    None,
    /// `y ≥ 0`, `Gᵀy = 0`, `hᵀy < 0`.
    Farkas(DVector<f64>),
    /// Lagrange multipliers: `c + Gᵀλ + Aᵀμ = 0` at the optimum.
    Multipliers {
        inequality: DVector<f64>,
        equality: DVector<f64>,
    },
    /// `G d ≤ 0` and `cᵀd < 0`.
    Ray(DVector<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveStatus {
    pub kind: StatusKind,
    pub certificate: Certificate,
    pub iterations: usize,
}

impl SolveStatus {
    pub fn is_optimal(&self) -> bool {
        self.kind == StatusKind::Optimal
    }

    fn failure(iterations: usize) -> Self {
        Self {
            kind: StatusKind::NumericalFailure,
            certificate: Certificate::None,
            iterations,
        }
    }

    /// Inequality multipliers, when the status carries them.
    pub fn multipliers(&self) -> Option<&DVector<f64>> {
        match &self.certificate {
            Certificate::Multipliers { inequality, .. } => Some(inequality),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub status: SolveStatus,
}

/// Solve an inequality-form LP.
///
/// On `Optimal`, `x` satisfies `G x ≤ h` to about 1e-9 and the certificate
/// holds the dual multipliers. On `Infeasible` the certificate is a Farkas
/// vector; on `Unbounded` it is an improving ray.
pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    let n = problem.g.ncols();
    let m = problem.g.nrows();
    if m == 0 {
        let unbounded = problem.c.iter().any(|v| *v != 0.0);
        return LpSolution {
            x: DVector::zeros(n),
            objective: if unbounded { f64::NEG_INFINITY } else { 0.0 },
            status: SolveStatus {
                kind: if unbounded {
                    StatusKind::Unbounded
                } else {
                    StatusKind::Optimal
                },
                certificate: if unbounded {
                    Certificate::Ray(-problem.c.clone())
                } else {
                    Certificate::Multipliers {
                        inequality: DVector::zeros(0),
                        equality: DVector::zeros(0),
                    }
                },
                iterations: 0,
            },
        };
    }

    let a = problem.g.transpose();
    let b = -&problem.c;
    match solve_standard(&a, &b, &problem.h) {
        Standard::Optimal { y, pi, iterations } => {
            let x = pi;
            let violation = (&problem.g * &x - &problem.h).max();
            let scale = 1.0 + problem.h.amax();
            if !violation.is_finite() || violation > 1e-6 * scale {
                return LpSolution {
                    x,
                    objective: f64::NAN,
                    status: SolveStatus::failure(iterations),
                };
            }
            LpSolution {
                objective: problem.c.dot(&x),
                x,
                status: SolveStatus {
                    kind: StatusKind::Optimal,
                    certificate: Certificate::Multipliers {
                        inequality: y,
                        equality: DVector::zeros(0),
                    },
                    iterations,
                },
            }
        }
        Standard::Unbounded { ray, iterations } => infeasible(n, ray, iterations),
        Standard::Infeasible { iterations } => {
            // Dual infeasible: the primal is unbounded or infeasible.
            let zero = DVector::zeros(n);
            match solve_standard(&a, &zero, &problem.h) {
                Standard::Optimal { pi, iterations: it2, .. } => {
                    let ray = improving_ray(problem);
                    LpSolution {
                        x: pi,
                        objective: f64::NEG_INFINITY,
                        status: SolveStatus {
                            kind: StatusKind::Unbounded,
                            certificate: ray.map_or(Certificate::None, Certificate::Ray),
                            iterations: iterations + it2,
                        },
                    }
                }
                Standard::Unbounded { ray, iterations: it2 } => {
                    infeasible(n, ray, iterations + it2)
                }
                _ => LpSolution {
                    x: DVector::zeros(n),
                    objective: f64::NAN,
                    status: SolveStatus::failure(iterations),
                },
            }
        }
        Standard::Failure { iterations } => LpSolution {
            x: DVector::zeros(n),
            objective: f64::NAN,
            status: SolveStatus::failure(iterations),
        },
    }
}

fn infeasible(n: usize, ray: DVector<f64>, iterations: usize) -> LpSolution {
    LpSolution {
        x: DVector::from_element(n, f64::NAN),
        objective: f64::INFINITY,
        status: SolveStatus {
            kind: StatusKind::Infeasible,
            certificate: Certificate::Farkas(ray),
            iterations,
        },
    }
}

/// `min cᵀd  s.t.  G d ≤ 0, −1 ≤ d ≤ 1`; a negative optimum is a ray.
fn improving_ray(problem: &LpProblem) -> Option<DVector<f64>> {
    let n = problem.g.ncols();
    let m = problem.g.nrows();
    let mut g = DMatrix::zeros(m + 2 * n, n);
    g.rows_mut(0, m).copy_from(&problem.g);
    for i in 0..n {
        g[(m + i, i)] = 1.0;
        g[(m + n + i, i)] = -1.0;
    }
    let mut h = DVector::zeros(m + 2 * n);
    h.rows_mut(m, 2 * n).fill(1.0);
    let a = g.transpose();
    match solve_standard(&a, &(-&problem.c), &h) {
        Standard::Optimal { pi, .. } if problem.c.dot(&pi) < -1e-12 => Some(pi),
        _ => None,
    }
}

enum Standard {
    Optimal {
        y: DVector<f64>,
        pi: DVector<f64>,
        iterations: usize,
    },
    Unbounded {
        ray: DVector<f64>,
        iterations: usize,
    },
    Infeasible {
        iterations: usize,
    },
    Failure {
        iterations: usize,
    },
}

enum Phase {
    Optimal,
    Unbounded { entering: usize, direction: DVector<f64> },
    Failure,
}

/// Revised simplex for `min costᵀy, A y = b, y ≥ 0` with `A` of shape n × m.
struct Tableau {
    a: DMatrix<f64>,
    b: DVector<f64>,
    sign: Vec<f64>,
    n: usize,
    m: usize,
    basis: Vec<usize>,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn new(a: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        let (n, m) = a.shape();
        let sign: Vec<f64> = b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut af = a.clone();
        let mut bf = b.clone();
        for i in 0..n {
            if sign[i] < 0.0 {
                af.row_mut(i).neg_mut();
                bf[i] = -bf[i];
            }
        }
        Self {
            a: af,
            b: bf,
            sign,
            n,
            m,
            basis: (m..m + n).collect(),
            iterations: 0,
            max_iterations: 50 * (n + m) + 1000,
        }
    }

    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.m {
            self.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.n);
            e[j - self.m] = 1.0;
            e
        }
    }

    fn basis_inverse(&self) -> Option<DMatrix<f64>> {
        let mut bm = DMatrix::zeros(self.n, self.n);
        for (k, &j) in self.basis.iter().enumerate() {
            bm.set_column(k, &self.column(j));
        }
        bm.lu().try_inverse()
    }

    fn run(&mut self, cost: &dyn Fn(usize) -> f64) -> Phase {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        let mut in_basis = vec![false; self.m + self.n];
        for &j in &self.basis {
            in_basis[j] = true;
        }
        loop {
            if self.iterations >= self.max_iterations {
                return Phase::Failure;
            }
            let Some(binv) = self.basis_inverse() else {
                return Phase::Failure;
            };
            let xb = &binv * &self.b;
            let cb = DVector::from_iterator(self.n, self.basis.iter().map(|&j| cost(j)));
            let pi = binv.transpose() * cb;

            // Artificial columns never re-enter.
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if in_basis[j] {
                    continue;
                }
                let cj = cost(j);
                let rc = cj - self.a.column(j).dot(&pi);
                if rc < -1e-10 * (1.0 + cj.abs()) {
                    match entering {
                        None => entering = Some((j, rc)),
                        Some((_, best)) if !bland && rc < best => entering = Some((j, rc)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Phase::Optimal;
            };

            let d = &binv * self.a.column(q);
            let dmax = d.amax().max(1.0);
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.n {
                if d[i] > PIVOT_TOL * dmax {
                    let ratio = xb[i].max(0.0) / d[i];
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - DEGENERATE_STEP {
                                Some((i, ratio))
                            } else if ratio <= best + DEGENERATE_STEP {
                                let better = if bland {
                                    self.basis[i] < self.basis[r]
                                } else {
                                    d[i] > d[r]
                                };
                                if better {
                                    Some((i, ratio.min(best)))
                                } else {
                                    Some((r, best))
                                }
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            let Some((r, theta)) = leave else {
                return Phase::Unbounded {
                    entering: q,
                    direction: d,
                };
            };

            if theta < DEGENERATE_STEP {
                degenerate_run += 1;
                if degenerate_run > BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            in_basis[self.basis[r]] = false;
            in_basis[q] = true;
            self.basis[r] = q;
            self.iterations += 1;
        }
    }

    /// Pivot basic artificials out where possible; rows where that fails are
    /// linearly dependent and keep a zero-valued artificial.
    fn expel_artificials(&mut self) -> bool {
        for r in 0..self.n {
            if self.basis[r] < self.m {
                continue;
            }
            let Some(binv) = self.basis_inverse() else {
                return false;
            };
            let row = binv.row(r).into_owned();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.m {
                if self.basis.contains(&j) {
                    continue;
                }
                let v = (&row * self.a.column(j))[0].abs();
                if v > PIVOT_TOL && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((j, v));
                }
            }
            if let Some((j, _)) = best {
                self.basis[r] = j;
            }
        }
        true
    }
}

fn solve_standard(a: &DMatrix<f64>, b: &DVector<f64>, cost: &DVector<f64>) -> Standard {
    let mut tab = Tableau::new(a, b);
    let m = tab.m;
    let n = tab.n;

    let phase1_cost = |j: usize| if j < m { 0.0 } else { 1.0 };
    match tab.run(&phase1_cost) {
        Phase::Optimal => {}
        // Phase 1 is bounded below by zero.
        _ => {
            return Standard::Failure {
                iterations: tab.iterations,
            }
        }
    }
    let Some(binv) = tab.basis_inverse() else {
        return Standard::Failure {
            iterations: tab.iterations,
        };
    };
    let xb = &binv * &tab.b;
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(xb.iter())
        .filter(|(j, _)| **j >= m)
        .map(|(_, v)| v.abs())
        .sum();
    if infeasibility > 1e-9 * (1.0 + tab.b.amax()) {
        return Standard::Infeasible {
            iterations: tab.iterations,
        };
    }
    if !tab.expel_artificials() {
        return Standard::Failure {
            iterations: tab.iterations,
        };
    }

    let phase2_cost = |j: usize| if j < m { cost[j] } else { 0.0 };
    match tab.run(&phase2_cost) {
        Phase::Optimal => {
            let Some(binv) = tab.basis_inverse() else {
                return Standard::Failure {
                    iterations: tab.iterations,
                };
            };
            let xb = &binv * &tab.b;
            let mut y = DVector::zeros(m);
            for (k, &j) in tab.basis.iter().enumerate() {
                if j < m {
                    y[j] = xb[k].max(0.0);
                }
            }
            let cb = DVector::from_iterator(n, tab.basis.iter().map(|&j| phase2_cost(j)));
            let mut pi = binv.transpose() * cb;
            for i in 0..n {
                pi[i] *= tab.sign[i];
            }
            Standard::Optimal {
                y,
                pi,
                iterations: tab.iterations,
            }
        }
        Phase::Unbounded {
            entering,
            direction,
        } => {
            let mut ray = DVector::zeros(m);
            ray[entering] = 1.0;
            for (k, &j) in tab.basis.iter().enumerate() {
                if j < m {
                    ray[j] = (-direction[k]).max(0.0);
                }
            }
            Standard::Unbounded {
                ray,
                iterations: tab.iterations,
            }
        }
        Phase::Failure => Standard::Failure {
            iterations: tab.iterations,
        },
    }
}
