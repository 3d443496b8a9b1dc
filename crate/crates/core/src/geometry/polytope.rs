use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::optimizers::{solve_lp, Certificate, LpProblem, StatusKind};

/// Absolute tolerance for geometric comparisons on normalized rows.
pub const GEOM_TOL: f64 = 1e-9;

/// `{x : F x ≤ g}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "Repr", into = "Repr")]
pub struct Polytope {
    f: DMatrix<f64>,
    g: DVector<f64>,
    /// Rows known to be unit-norm and irredundant.
    canonical: bool,
}

/// Equality of representations, not of sets; see [`Polytope::set_eq`].
impl PartialEq for Polytope {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.g == other.g
    }
}

#[derive(Serialize, Deserialize)]
struct Repr {
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    g: Vec<f64>,
    dim: usize,
}

impl TryFrom<Repr> for Polytope {
    type Error = Error;

    fn try_from(r: Repr) -> Result<Self> {
        if r.f.iter().any(|row| row.len() != r.dim) {
            return Err(Error::InvalidInput(format!(
                "every row of F must have {} entries",
                r.dim
            )));
        }
        let f = DMatrix::from_fn(r.f.len(), r.dim, |i, j| r.f[i][j]);
        Polytope::new(f, DVector::from_vec(r.g))
    }
}

impl From<Polytope> for Repr {
    fn from(p: Polytope) -> Self {
        Repr {
            f: p.f.row_iter().map(|r| r.iter().copied().collect()).collect(),
            g: p.g.iter().copied().collect(),
            dim: p.dim(),
        }
    }
}

fn lp_failure(what: &str) -> Error {
    Error::Solver(format!("LP numerical failure while computing {what}"))
}

impl Polytope {
    pub fn new(f: DMatrix<f64>, g: DVector<f64>) -> Result<Self> {
        if f.ncols() == 0 {
            return Err(Error::InvalidInput("polytope dimension must be ≥ 1".into()));
        }
        if f.nrows() == 0 {
            return Err(Error::InvalidInput("polytope needs at least one row".into()));
        }
        check_dim(f.nrows(), g.len())?;
        if f.iter().any(|v| !v.is_finite()) || g.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidInput("non-finite polytope data".into()));
        }
        if g.iter().any(|v| *v == f64::NEG_INFINITY) {
            return Ok(Self::empty(f.ncols()));
        }
        // Rows with g = +∞ are vacuous.
        let keep: Vec<usize> = (0..g.len()).filter(|&i| g[i].is_finite()).collect();
        if keep.is_empty() {
            return Err(Error::InvalidInput("polytope has only vacuous rows".into()));
        }
        let f = f.select_rows(keep.iter());
        let g = g.select_rows(keep.iter());
        Ok(Self {
            f,
            g,
            canonical: false,
        })
    }

    pub fn from_box(lower: &DVector<f64>, upper: &DVector<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        for i in 0..lower.len() {
            if !(lower[i] < upper[i]) {
                return Err(Error::InvalidInput(format!(
                    "degenerate box in coordinate {i}: lower {} ≥ upper {}",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self::box_unchecked(lower, upper))
    }

    fn box_unchecked(lower: &DVector<f64>, upper: &DVector<f64>) -> Self {
        let n = lower.len();
        let mut f = DMatrix::zeros(2 * n, n);
        let mut g = DVector::zeros(2 * n);
        for i in 0..n {
            f[(2 * i, i)] = 1.0;
            g[2 * i] = upper[i];
            f[(2 * i + 1, i)] = -1.0;
            g[2 * i + 1] = -lower[i];
        }
        Self {
            f,
            g,
            canonical: true,
        }
    }

    /// Symmetric box `[−r, r]ⁿ`.
    pub fn hypercube(n: usize, r: f64) -> Result<Self> {
        Self::from_box(&DVector::from_element(n, -r), &DVector::from_element(n, r))
    }

    pub fn singleton(point: &DVector<f64>) -> Self {
        Self::box_unchecked(point, point)
    }

    /// A canonical empty set of dimension `n`.
    pub fn empty(n: usize) -> Self {
        let mut f = DMatrix::zeros(2, n);
        f[(0, 0)] = 1.0;
        f[(1, 0)] = -1.0;
        Self {
            f,
            g: DVector::from_element(2, -1.0),
            canonical: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    pub fn n_rows(&self) -> usize {
        self.f.nrows()
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn g(&self) -> &DVector<f64> {
        &self.g
    }

    pub fn is_canonical(&self) -> bool {
        self.canonical
    }

    /// Rows scaled to unit norm. Zero rows are dropped when vacuous; a zero
    /// row with negative offset makes the set empty.
    pub fn normalized(&self) -> Self {
        if self.canonical {
            return self.clone();
        }
        let n = self.dim();
        let mut rows = Vec::new();
        let mut offsets = Vec::new();
        for i in 0..self.n_rows() {
            let norm = self.f.row(i).norm();
            if norm <= 1e-12 {
                if self.g[i] < -GEOM_TOL {
                    return Self::empty(n);
                }
                continue;
            }
            rows.push(self.f.row(i) / norm);
            offsets.push(self.g[i] / norm);
        }
        if rows.is_empty() {
            // Only vacuous rows: the whole space. Not bounded, but keep a
            // well-formed value for callers that intersect it later.
            let mut f = DMatrix::zeros(1, n);
            f[(0, 0)] = 1.0;
            return Self {
                f,
                g: DVector::from_element(1, f64::MAX),
                canonical: true,
            };
        }
        Self {
            f: DMatrix::from_rows(&rows),
            g: DVector::from_vec(offsets),
            canonical: true,
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        let r = &self.f * x - &self.g;
        Ok(r.iter().all(|v| *v <= tol))
    }

    /// Largest constraint violation `max(F x − g)` (negative inside).
    pub fn max_violation(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok((&self.f * x - &self.g).max())
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.emptiness_certificate()?.is_some())
    }

    /// A Farkas vector `y ≥ 0` with `Fᵀy = 0`, `gᵀy < 0` when the set is empty.
    pub fn emptiness_certificate(&self) -> Result<Option<DVector<f64>>> {
        let lp = LpProblem::feasibility(self.f.clone(), self.g.clone())?;
        let sol = solve_lp(&lp);
        match sol.status.kind {
            StatusKind::Optimal => Ok(None),
            StatusKind::Infeasible => match sol.status.certificate {
                Certificate::Farkas(y) => Ok(Some(y)),
                _ => Ok(Some(DVector::zeros(self.n_rows()))),
            },
            _ => Err(lp_failure("emptiness")),
        }
    }

    /// Some point of the set, if any.
    pub fn feasible_point(&self) -> Result<Option<DVector<f64>>> {
        let lp = LpProblem::feasibility(self.f.clone(), self.g.clone())?;
        let sol = solve_lp(&lp);
        match sol.status.kind {
            StatusKind::Optimal => Ok(Some(sol.x)),
            StatusKind::Infeasible => Ok(None),
            _ => Err(lp_failure("a feasible point")),
        }
    }

    pub fn intersect(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        let mut f = DMatrix::zeros(self.n_rows() + other.n_rows(), self.dim());
        f.rows_mut(0, self.n_rows()).copy_from(&self.f);
        f.rows_mut(self.n_rows(), other.n_rows()).copy_from(&other.f);
        let mut g = DVector::zeros(self.n_rows() + other.n_rows());
        g.rows_mut(0, self.n_rows()).copy_from(&self.g);
        g.rows_mut(self.n_rows(), other.n_rows()).copy_from(&other.g);
        Ok(Self {
            f,
            g,
            canonical: self.canonical && other.canonical,
        })
    }

    /// `{z : M z ∈ P}`. The result may be unbounded.
    pub fn affine_preimage(&self, m: &DMatrix<f64>) -> Result<Self> {
        check_dim(self.dim(), m.nrows())?;
        Self::new(&self.f * m, self.g.clone())
    }

    /// `{z : M z + c ∈ P}`.
    pub fn affine_preimage_offset(&self, m: &DMatrix<f64>, c: &DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), m.nrows())?;
        check_dim(self.dim(), c.len())?;
        Self::new(&self.f * m, &self.g - &self.f * c)
    }

    /// `{M b : b ∈ P}`.
    ///
    /// Invertible square maps substitute into the constraints. Otherwise the
    /// image is rebuilt from mapped vertices (dim P ≤ 3) or by projecting the
    /// graph of the map (image dimension ≤ 3).
    pub fn affine_image(&self, m: &DMatrix<f64>) -> Result<Self> {
        check_dim(self.dim(), m.ncols())?;
        if m.is_square() {
            let sv = m.clone().singular_values();
            if sv.min() > 1e-12 * sv.max() {
                if let Some(inv) = m.clone().full_piv_lu().try_inverse() {
                    return Self::new(&self.f * inv, self.g.clone());
                }
            }
        }
        let k = m.nrows();
        if self.dim() <= 3 {
            let verts = self.vertices()?;
            let mapped: Vec<DVector<f64>> = verts.iter().map(|v| m * v).collect();
            if mapped.is_empty() {
                return Ok(Self::empty(k));
            }
            return super::convex_hull(&mapped);
        }
        if k <= 3 {
            // Graph {(y, b) : y = M b, b ∈ P}, projected onto y.
            let n = self.dim();
            let rows = self.n_rows() + 2 * k;
            let mut f = DMatrix::zeros(rows, k + n);
            let mut g = DVector::zeros(rows);
            f.view_mut((0, k), (self.n_rows(), n)).copy_from(&self.f);
            g.rows_mut(0, self.n_rows()).copy_from(&self.g);
            let r0 = self.n_rows();
            for i in 0..k {
                f[(r0 + i, i)] = 1.0;
                f[(r0 + k + i, i)] = -1.0;
                for j in 0..n {
                    f[(r0 + i, k + j)] = -m[(i, j)];
                    f[(r0 + k + i, k + j)] = m[(i, j)];
                }
            }
            let graph = Self::new(f, g)?;
            return graph.project(&(0..k).collect::<Vec<_>>());
        }
        Err(Error::Unsupported(format!(
            "affine image of a {}-dimensional set into dimension {k} under a singular map",
            self.dim()
        )))
    }

    /// `max{aᵀx : x ∈ P}`.
    pub fn support(&self, a: &DVector<f64>) -> Result<f64> {
        Ok(self.support_point(a)?.0)
    }

    /// Support value and a maximizer.
    pub fn support_point(&self, a: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        check_dim(self.dim(), a.len())?;
        let lp = LpProblem::new(-a, self.f.clone(), self.g.clone())?;
        let sol = solve_lp(&lp);
        match sol.status.kind {
            StatusKind::Optimal => Ok((-sol.objective, sol.x)),
            StatusKind::Unbounded => Err(Error::Unbounded),
            StatusKind::Infeasible => Err(Error::Infeasible),
            StatusKind::NumericalFailure => Err(lp_failure("a support function")),
        }
    }

    /// `P ⊖ Q = {x : x + q ∈ P ∀q ∈ Q}` by tightening every row of P.
    pub fn pontryagin_diff(&self, q: &Self) -> Result<Self> {
        check_dim(self.dim(), q.dim())?;
        let mut g = self.g.clone();
        for i in 0..self.n_rows() {
            g[i] -= q.support(&self.f.row(i).transpose())?;
        }
        Ok(Self {
            f: self.f.clone(),
            g,
            canonical: self.canonical,
        })
    }

    /// Explicit Minkowski sum for dimension ≤ 3.
    pub fn minkowski_sum(&self, q: &Self) -> Result<Self> {
        check_dim(self.dim(), q.dim())?;
        if self.dim() > 3 {
            return Err(Error::Unsupported(format!(
                "explicit Minkowski sum in dimension {}; use minkowski_sum_implicit",
                self.dim()
            )));
        }
        let a = self.vertices()?;
        let b = q.vertices()?;
        if a.is_empty() || b.is_empty() {
            return Ok(Self::empty(self.dim()));
        }
        let mut pts = Vec::with_capacity(a.len() * b.len());
        for u in &a {
            for v in &b {
                pts.push(u + v);
            }
        }
        super::convex_hull(&pts)
    }

    /// Minkowski sum kept as the lifted set `{(x, p) : p ∈ P, x − p ∈ Q}`.
    pub fn minkowski_sum_implicit(&self, q: &Self) -> Result<ImplicitSum> {
        check_dim(self.dim(), q.dim())?;
        let n = self.dim();
        let (mp, mq) = (self.n_rows(), q.n_rows());
        let mut f = DMatrix::zeros(mp + mq, 2 * n);
        let mut g = DVector::zeros(mp + mq);
        f.view_mut((0, n), (mp, n)).copy_from(&self.f);
        g.rows_mut(0, mp).copy_from(&self.g);
        f.view_mut((mp, 0), (mq, n)).copy_from(&q.f);
        f.view_mut((mp, n), (mq, n)).copy_from(&(-&q.f));
        g.rows_mut(mp, mq).copy_from(&q.g);
        Ok(ImplicitSum {
            lifted: Self::new(f, g)?,
            dim: n,
        })
    }

    /// Is there a completion `z` with `(x at keep, z elsewhere) ∈ P`?
    pub fn exists_completion(&self, keep: &[usize], x: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim(keep.len(), x.len())?;
        let n = self.dim();
        let rest: Vec<usize> = (0..n).filter(|j| !keep.contains(j)).collect();
        if rest.is_empty() {
            let mut full = DVector::zeros(n);
            for (k, &j) in keep.iter().enumerate() {
                full[j] = x[k];
            }
            return self.contains(&full, tol);
        }
        let mut g = self.g.add_scalar(tol);
        for (k, &j) in keep.iter().enumerate() {
            g -= self.f.column(j) * x[k];
        }
        let f = self.f.select_columns(rest.iter());
        Ok(!Self::new(f, g)?.is_empty()?)
    }

    /// Drops rows implied by the others. Each removal is certified by an LP.
    pub fn remove_redundancy(&self) -> Result<Self> {
        let p = self.normalized().dedup_rows();
        if p.is_empty()? {
            return Err(Error::InvalidInput(
                "cannot remove redundancy from an empty set".into(),
            ));
        }
        let mut keep: Vec<bool> = vec![true; p.n_rows()];
        for i in 0..p.n_rows() {
            let others: Vec<usize> = (0..p.n_rows()).filter(|&j| j != i && keep[j]).collect();
            if others.is_empty() {
                continue;
            }
            let fi = p.f.row(i).transpose();
            let mut f = p.f.select_rows(others.iter()).insert_row(others.len(), 0.0);
            f.row_mut(others.len()).copy_from(&fi.transpose());
            let mut g = p.g.select_rows(others.iter()).insert_row(others.len(), 0.0);
            g[others.len()] = p.g[i] + 1.0;
            let sol = solve_lp(&LpProblem::new(-&fi, f, g)?);
            match sol.status.kind {
                StatusKind::Optimal => {
                    if -sol.objective <= p.g[i] + GEOM_TOL {
                        keep[i] = false;
                    }
                }
                StatusKind::NumericalFailure => return Err(lp_failure("redundancy")),
                _ => {}
            }
        }
        let rows: Vec<usize> = (0..p.n_rows()).filter(|&i| keep[i]).collect();
        Ok(Self {
            f: p.f.select_rows(rows.iter()),
            g: p.g.select_rows(rows.iter()),
            canonical: true,
        })
    }

    /// Removes exact and near-duplicate normalized rows, keeping the tightest.
    pub(crate) fn dedup_rows(&self) -> Self {
        let mut order: Vec<usize> = (0..self.n_rows()).collect();
        order.sort_by(|&a, &b| self.g[a].total_cmp(&self.g[b]));
        let mut kept: Vec<usize> = Vec::new();
        for i in order {
            let dup = kept
                .iter()
                .any(|&k| (self.f.row(i) - self.f.row(k)).amax() <= 1e-12);
            if !dup {
                kept.push(i);
            }
        }
        kept.sort_unstable();
        Self {
            f: self.f.select_rows(kept.iter()),
            g: self.g.select_rows(kept.iter()),
            canonical: self.canonical,
        }
    }

    /// Shoelace area of a 2-D polytope.
    pub fn volume_2d(&self) -> Result<f64> {
        if self.dim() != 2 {
            return Err(Error::InvalidInput(format!(
                "volume_2d needs a 2-D polytope, got dimension {}",
                self.dim()
            )));
        }
        let v = self.vertices()?;
        if v.len() < 3 {
            return Ok(0.0);
        }
        let mut twice = 0.0;
        for i in 0..v.len() {
            let (a, b) = (&v[i], &v[(i + 1) % v.len()]);
            twice += a[0] * b[1] - a[1] * b[0];
        }
        Ok(0.5 * twice.abs())
    }

    pub fn cartesian_product(&self, other: &Self) -> Self {
        let (m1, n1) = self.f.shape();
        let (m2, n2) = other.f.shape();
        let mut f = DMatrix::zeros(m1 + m2, n1 + n2);
        f.view_mut((0, 0), (m1, n1)).copy_from(&self.f);
        f.view_mut((m1, n1), (m2, n2)).copy_from(&other.f);
        let mut g = DVector::zeros(m1 + m2);
        g.rows_mut(0, m1).copy_from(&self.g);
        g.rows_mut(m1, m2).copy_from(&other.g);
        Self {
            f,
            g,
            canonical: self.canonical && other.canonical,
        }
    }

    /// `Pⁿ` as a block-diagonal stack.
    pub fn cartesian_power(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("cartesian power needs n ≥ 1".into()));
        }
        let mut out = self.clone();
        for _ in 1..n {
            out = out.cartesian_product(self);
        }
        Ok(out)
    }

    /// Center and radius of the largest inscribed ball (rows become unit norm).
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        let p = self.normalized();
        let n = p.dim();
        let m = p.n_rows();
        let mut f = DMatrix::zeros(m + 1, n + 1);
        f.view_mut((0, 0), (m, n)).copy_from(&p.f);
        for i in 0..m {
            f[(i, n)] = 1.0;
        }
        f[(m, n)] = -1.0;
        let g = p.g.clone().insert_row(m, 0.0);
        let mut c = DVector::zeros(n + 1);
        c[n] = -1.0;
        let sol = solve_lp(&LpProblem::new(c, f, g)?);
        match sol.status.kind {
            StatusKind::Optimal => Ok((sol.x.rows(0, n).into_owned(), sol.x[n].max(0.0))),
            StatusKind::Infeasible => Err(Error::InvalidInput(
                "Chebyshev center of an empty set".into(),
            )),
            StatusKind::Unbounded => Err(Error::Unbounded),
            StatusKind::NumericalFailure => Err(lp_failure("the Chebyshev center")),
        }
    }

    /// `{x + v : x ∈ P}`.
    pub fn translate(&self, v: &DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), v.len())?;
        Ok(Self {
            f: self.f.clone(),
            g: &self.g + &self.f * v,
            canonical: self.canonical,
        })
    }

    /// `min_i (g_i − h_Q(f_i))` over the rows of `self`: non-negative iff
    /// `Q ⊆ self` (up to the sign of the slack).
    pub fn inclusion_slack(&self, q: &Self) -> Result<f64> {
        check_dim(self.dim(), q.dim())?;
        let p = self.normalized();
        let mut slack = f64::INFINITY;
        for i in 0..p.n_rows() {
            let s = p.g[i] - q.support(&p.f.row(i).transpose())?;
            slack = slack.min(s);
        }
        Ok(slack)
    }

    /// `Q ⊆ self` up to `tol` on normalized rows.
    pub fn contains_set(&self, q: &Self, tol: f64) -> Result<bool> {
        Ok(self.inclusion_slack(q)? >= -tol)
    }

    /// Mutual inclusion within `tol`.
    pub fn set_eq(&self, q: &Self, tol: f64) -> Result<bool> {
        Ok(self.contains_set(q, tol)? && q.contains_set(self, tol)?)
    }

    /// Tight axis-aligned bounds `(lower, upper)`.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            hi[i] = self.support(&e)?;
            lo[i] = -self.support(&(-e))?;
        }
        Ok((lo, hi))
    }
}

/// A Minkowski sum `P ⊕ Q` held as `{(x, p) : p ∈ P, x − p ∈ Q}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitSum {
    pub lifted: Polytope,
    pub dim: usize,
}

impl ImplicitSum {
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        let keep: Vec<usize> = (0..self.dim).collect();
        self.lifted.exists_completion(&keep, x, tol)
    }

    pub fn support(&self, a: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim, a.len())?;
        let mut full = DVector::zeros(2 * self.dim);
        full.rows_mut(0, self.dim).copy_from(a);
        self.lifted.support(&full)
    }

    /// Explicit H-representation via projection.
    pub fn to_polytope(&self) -> Result<Polytope> {
        self.lifted.project(&(0..self.dim).collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn unit_box() -> Polytope {
        Polytope::hypercube(2, 1.0).unwrap()
    }

    fn x_p() -> Polytope {
        Polytope::from_box(&dvector![0.0, 2.8], &dvector![2.0, 3.8]).unwrap()
    }

    fn w_box() -> Polytope {
        Polytope::hypercube(2, 0.2).unwrap()
    }

    fn g_mat() -> DMatrix<f64> {
        dmatrix![0.02, 0.0; 0.01, 0.19]
    }

    #[test]
    fn from_box_rejects_degenerate() {
        assert!(Polytope::from_box(&dvector![0.0, 1.0], &dvector![1.0, 1.0]).is_err());
        let u = Polytope::from_box(&dvector![0.0], &dvector![1.0]).unwrap();
        assert_eq!(u.n_rows(), 2);
    }

    #[test]
    fn membership() {
        let b = unit_box();
        assert!(b.contains(&dvector![0.0, 0.0], 0.0).unwrap());
        assert!(b.contains(&dvector![1.0 + 1e-12, 0.0], 1e-9).unwrap());
        assert!(!b.contains(&dvector![1.1, 0.0], 1e-9).unwrap());
        assert!(x_p().contains(&dvector![1.06, 3.30], 0.0).unwrap());
        assert!(b.contains(&dvector![0.0], 0.0).is_err());
    }

    #[test]
    fn emptiness() {
        let p = Polytope::new(dmatrix![1.0; -1.0], dvector![-1.0, -1.0]).unwrap();
        assert!(p.is_empty().unwrap());
        let y = p.emptiness_certificate().unwrap().unwrap();
        assert!(y.iter().all(|v| *v >= 0.0));
        assert!((p.f().transpose() * &y).amax() < 1e-12);
        assert!(p.g().dot(&y) < 0.0);
        assert!(!unit_box().is_empty().unwrap());
    }

    #[test]
    fn box_intersection() {
        let a = Polytope::from_box(&dvector![0.0, 0.0], &dvector![2.0, 2.0]).unwrap();
        let b = Polytope::from_box(&dvector![1.0, 1.0], &dvector![3.0, 3.0]).unwrap();
        let c = Polytope::from_box(&dvector![1.0, 1.0], &dvector![2.0, 2.0]).unwrap();
        assert!(a.intersect(&b).unwrap().set_eq(&c, 1e-9).unwrap());
    }

    #[test]
    fn preimage_scaling() {
        let p = unit_box().affine_preimage(&(DMatrix::identity(2, 2) * 2.0)).unwrap();
        let half = Polytope::hypercube(2, 0.5).unwrap();
        assert!(p.set_eq(&half, 1e-12).unwrap());
    }

    #[test]
    fn image_of_disturbance_box() {
        let gw = w_box().affine_image(&g_mat()).unwrap();
        assert!((gw.support(&dvector![1.0, 0.0]).unwrap() - 0.004).abs() < 1e-12);
        assert!((gw.support(&dvector![-1.0, 0.0]).unwrap() - 0.004).abs() < 1e-12);
        assert!((gw.support(&dvector![0.0, 1.0]).unwrap() - 0.04).abs() < 1e-12);
        assert!((gw.support(&dvector![0.0, -1.0]).unwrap() - 0.04).abs() < 1e-12);
    }

    #[test]
    fn image_under_singular_map_is_segment() {
        let u = Polytope::from_box(&dvector![0.0], &dvector![1.0]).unwrap();
        let seg = u.affine_image(&dmatrix![-0.30; -0.06]).unwrap();
        assert!(seg.contains(&dvector![0.0, 0.0], 1e-9).unwrap());
        assert!(seg.contains(&dvector![-0.30, -0.06], 1e-9).unwrap());
        assert!(seg.contains(&dvector![-0.15, -0.03], 1e-9).unwrap());
        assert!(!seg.contains(&dvector![-0.15, 0.0], 1e-6).unwrap());
        assert!(!seg.contains(&dvector![0.01, 0.002], 1e-6).unwrap());
    }

    #[test]
    fn image_via_projection_in_high_dimension() {
        // Sum of four unit intervals: [−4, 4].
        let b = Polytope::hypercube(4, 1.0).unwrap();
        let img = b.affine_image(&dmatrix![1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!((img.support(&dvector![1.0]).unwrap() - 4.0).abs() < 1e-9);
        assert!((img.support(&dvector![-1.0]).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn supports() {
        assert!((unit_box().support(&dvector![1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((w_box().support(&dvector![1.0, 1.0]).unwrap() - 0.4).abs() < 1e-12);
        let half = Polytope::new(dmatrix![1.0, 0.0], dvector![1.0]).unwrap();
        assert_eq!(half.support(&dvector![0.0, 1.0]), Err(Error::Unbounded));
    }

    #[test]
    fn pontryagin_examples() {
        let zero = Polytope::singleton(&dvector![0.0, 0.0]);
        assert!(x_p().pontryagin_diff(&zero).unwrap().set_eq(&x_p(), 1e-12).unwrap());
        let gw = w_box().affine_image(&g_mat()).unwrap();
        let tight = x_p().pontryagin_diff(&gw).unwrap();
        let expect = Polytope::from_box(&dvector![0.004, 2.84], &dvector![1.996, 3.76]).unwrap();
        assert!(tight.set_eq(&expect, 1e-12).unwrap());
        let selfdiff = unit_box().pontryagin_diff(&unit_box()).unwrap();
        assert!(selfdiff.g().amax() < 1e-12);
        assert!(selfdiff.contains(&dvector![0.0, 0.0], 1e-12).unwrap());
    }

    #[test]
    fn minkowski_examples() {
        let a = Polytope::from_box(&dvector![0.0, 0.0], &dvector![1.0, 1.0]).unwrap();
        let b = Polytope::hypercube(2, 0.5).unwrap();
        let s = a.minkowski_sum(&b).unwrap();
        let expect = Polytope::from_box(&dvector![-0.5, -0.5], &dvector![1.5, 1.5]).unwrap();
        assert!(s.set_eq(&expect, 1e-9).unwrap());
        let zero = Polytope::singleton(&dvector![0.0, 0.0]);
        assert!(a.minkowski_sum(&zero).unwrap().set_eq(&a, 1e-9).unwrap());

        let imp = a.minkowski_sum_implicit(&b).unwrap();
        assert!(imp.contains(&dvector![1.5, -0.5], 1e-9).unwrap());
        assert!(!imp.contains(&dvector![1.6, 0.0], 1e-9).unwrap());
        assert!((imp.support(&dvector![1.0, 1.0]).unwrap() - 3.0).abs() < 1e-9);
        assert!(imp.to_polytope().unwrap().set_eq(&expect, 1e-9).unwrap());
        let big = Polytope::hypercube(4, 1.0).unwrap();
        assert!(big.minkowski_sum(&big).is_err());
    }

    #[test]
    fn redundancy() {
        let dup = Polytope::new(
            dmatrix![1.0, 0.0; -1.0, 0.0; 0.0, 1.0; 0.0, -1.0; 1.0, 0.0],
            dvector![1.0, 1.0, 1.0, 1.0, 1.0],
        )
        .unwrap();
        assert_eq!(dup.remove_redundancy().unwrap().n_rows(), 4);
        let slack = unit_box()
            .intersect(&Polytope::new(dmatrix![1.0, 0.0], dvector![5.0]).unwrap())
            .unwrap();
        assert_eq!(slack.remove_redundancy().unwrap().n_rows(), 4);
        let empty = Polytope::empty(2);
        assert!(empty.remove_redundancy().is_err());
    }

    #[test]
    fn volumes() {
        assert!((unit_box().volume_2d().unwrap() - 4.0).abs() < 1e-12);
        assert!((x_p().volume_2d().unwrap() - 2.0).abs() < 1e-12);
        assert!(Polytope::hypercube(3, 1.0).unwrap().volume_2d().is_err());
    }

    #[test]
    fn powers() {
        assert_eq!(w_box().cartesian_power(1).unwrap(), w_box());
        let w10 = w_box().cartesian_power(10).unwrap();
        assert_eq!(w10.n_rows(), 40);
        assert_eq!(w10.dim(), 20);
    }

    #[test]
    fn chebyshev() {
        let (c, r) = unit_box().chebyshev_center().unwrap();
        assert!(c.amax() < 1e-12 && (r - 1.0).abs() < 1e-12);
        let simplex = Polytope::new(
            dmatrix![-1.0, 0.0; 0.0, -1.0; 1.0, 1.0],
            dvector![0.0, 0.0, 1.0],
        )
        .unwrap();
        let (_, r) = simplex.chebyshev_center().unwrap();
        assert!((r - 1.0 / (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!(Polytope::empty(2).chebyshev_center().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = x_p();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"F\"") && text.contains("\"dim\":2"));
        let back: Polytope = serde_json::from_str(&text).unwrap();
        assert_eq!(back.f(), p.f());
        assert_eq!(back.g(), p.g());
        let bad = r#"{"F": [[1.0, 0.0]], "g": [1.0], "dim": 3}"#;
        assert!(serde_json::from_str::<Polytope>(bad).is_err());
    }

    #[test]
    fn translation() {
        let t = unit_box().translate(&dvector![1.0, 2.0]).unwrap();
        assert!(t.contains(&dvector![2.0, 3.0], 1e-12).unwrap());
        assert!(!t.contains(&dvector![-0.5, 0.0], 1e-12).unwrap());
    }
}
