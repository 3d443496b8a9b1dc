//! Riccati and Lyapunov solvers, spectral radius, LQR gain.

use nalgebra::{DMatrix, Schur};

use crate::error::{check_dim, Error, Result};

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;
const SDA_MAX_ITER: usize = 100;
const KRONECKER_MAX_DIM: usize = 12;

pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::InvalidInput("spectral radius of a non-square matrix".into()));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    let schur = Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::Solver("Schur iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol
}

/// Symmetric and Cholesky-factorizable.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    is_symmetric(m, 1e-10 * (1.0 + m.amax())) && m.clone().cholesky().is_some()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// `‖A X Aᵀ − X + Q‖_∞` (max-abs entry).
pub fn dlyap_residual(a: &DMatrix<f64>, q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    (a * x * a.transpose() - x + q).amax()
}

/// Solves `A X Aᵀ − X + Q = 0`. Call with `Aᵀ` for `Aᵀ X A − X + Q = 0`.
pub fn solve_dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || !q.is_square() {
        return Err(Error::InvalidInput("Lyapunov equation needs square matrices".into()));
    }
    check_dim(n, q.nrows())?;
    let rho = spectral_radius(a)?;
    if rho >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "Lyapunov equation needs a Schur-stable matrix (ρ = {rho})"
        )));
    }
    let x = if n <= KRONECKER_MAX_DIM {
        // vec(A X Aᵀ) = (A ⊗ A) vec(X).
        let kron = a.kronecker(a);
        let lhs = DMatrix::identity(n * n, n * n) - kron;
        let rhs = DMatrix::from_column_slice(n * n, 1, q.as_slice());
        let sol = lhs
            .full_piv_lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Solver("singular Kronecker system".into()))?;
        DMatrix::from_column_slice(n, n, sol.as_slice())
    } else {
        smith(a, q)?
    };
    Ok(symmetrize(&x))
}

/// Squared Smith iteration `X ← X + Aₖ X Aₖᵀ`, `Aₖ₊₁ = Aₖ²`.
fn smith(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut x = q.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let step = &ak * &x * ak.transpose();
        x += &step;
        ak = &ak * &ak;
        if step.amax() <= 1e-16 * x.amax().max(1e-300) {
            return Ok(x);
        }
    }
    Err(Error::Solver("Smith iteration did not converge".into()))
}

/// `‖AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q − P‖_∞`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let bt_p = b.transpose() * p;
    let s = r + &bt_p * b;
    let Some(s_inv) = s.try_inverse() else {
        return f64::INFINITY;
    };
    let at_p = a.transpose() * p;
    (&at_p * a - &at_p * b * s_inv * bt_p * a + q - p).amax()
}

/// Stabilizing solution of the discrete algebraic Riccati equation by the
/// structure-preserving doubling algorithm.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::InvalidInput("A must be square".into()));
    }
    check_dim(n, b.nrows())?;
    check_dim(n, q.nrows())?;
    check_dim(n, q.ncols())?;
    check_dim(b.ncols(), r.nrows())?;
    check_dim(b.ncols(), r.ncols())?;
    if !is_positive_definite(q) {
        return Err(Error::InvalidInput("Q must be symmetric positive definite".into()));
    }
    if !is_positive_definite(r) {
        return Err(Error::InvalidInput("R must be symmetric positive definite".into()));
    }
    let r_inv = r.clone().try_inverse().expect("R is positive definite");
    let mut ak = a.clone();
    let mut gk = symmetrize(&(b * r_inv * b.transpose()));
    let mut hk = q.clone();
    let eye = DMatrix::identity(n, n);
    for _ in 0..SDA_MAX_ITER {
        let w = (&eye + &gk * &hk)
            .try_inverse()
            .ok_or_else(|| Error::Solver("singular doubling step".into()))?;
        let wa = &w * &ak;
        let h_next = symmetrize(&(&hk + ak.transpose() * &hk * &wa));
        let g_next = symmetrize(&(&gk + &ak * &w * &gk * ak.transpose()));
        let a_next = &ak * &wa;
        let delta = (&h_next - &hk).amax();
        hk = h_next;
        gk = g_next;
        ak = a_next;
        if delta <= 1e-15 * hk.amax() {
            break;
        }
    }
    if !hk.iter().all(|v| v.is_finite()) {
        return Err(Error::Solver("Riccati doubling diverged".into()));
    }
    let residual = dare_residual(a, b, q, r, &hk);
    if residual > 1e-8 * (1.0 + hk.amax()) {
        return Err(Error::Solver(format!(
            "Riccati doubling did not converge (residual {residual:.3e})"
        )));
    }
    Ok(hk)
}

/// `K = (R + BᵀPB)⁻¹BᵀPA` for the DARE solution `P`; returns `(K, P)`.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = solve_dare(a, b, q, r)?;
    let bt_p = b.transpose() * &p;
    let k = (r + &bt_p * b)
        .try_inverse()
        .ok_or_else(|| Error::Solver("singular LQR gain system".into()))?
        * bt_p
        * a;
    let rho = spectral_radius(&(a - b * &k))?;
    if rho >= 1.0 {
        return Err(Error::Solver(format!(
            "LQR gain is not stabilizing (ρ(A − BK) = {rho})"
        )));
    }
    Ok((k, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn dcdc_a() -> DMatrix<f64> {
        dmatrix![0.99, -0.02; 0.21, 0.92]
    }

    #[test]
    fn radius_examples() {
        assert!((spectral_radius(&DMatrix::identity(2, 2)).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(spectral_radius(&DMatrix::zeros(2, 2)).unwrap(), 0.0);
        let rho = spectral_radius(&dcdc_a()).unwrap();
        assert!((rho - 0.915f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn dlyap_examples() {
        let q = dmatrix![2.0, 0.5; 0.5, 1.0];
        let x = solve_dlyap(&DMatrix::zeros(2, 2), &q).unwrap();
        assert!((x - &q).amax() < 1e-15);
        let x = solve_dlyap(&(DMatrix::identity(2, 2) * 0.5), &DMatrix::identity(2, 2)).unwrap();
        assert!((x - DMatrix::identity(2, 2) * (4.0 / 3.0)).amax() < 1e-14);
        assert!(solve_dlyap(&(DMatrix::identity(2, 2) * 1.5), &q).is_err());
    }

    #[test]
    fn smith_matches_kronecker() {
        let a = dcdc_a();
        let q = dmatrix![0.3, 0.1; 0.1, 0.2];
        let x = solve_dlyap(&a, &q).unwrap();
        let y = smith(&a, &q).unwrap();
        assert!((x - y).amax() < 1e-10);
    }

    #[test]
    fn dare_scalar() {
        // p = 0.25p − 0.25p²/(1+p) + 1, times (1+p): p² − 0.25p − 1 = 0.
        let p_expect = (0.25 + (0.0625f64 + 4.0).sqrt()) / 2.0;
        let (k, p) = lqr_gain(&dmatrix![0.5], &dmatrix![1.0], &dmatrix![1.0], &dmatrix![1.0]).unwrap();
        assert!((p[(0, 0)] - p_expect).abs() < 1e-12);
        assert!((k[(0, 0)] - p_expect * 0.5 / (1.0 + p_expect)).abs() < 1e-12);
    }

    #[test]
    fn dare_zero_dynamics() {
        let q = dmatrix![1.0, 0.0; 0.0, 5.0];
        let (k, p) = lqr_gain(&DMatrix::zeros(2, 2), &dmatrix![0.3; 0.06], &q, &dmatrix![1.0]).unwrap();
        assert!((p - q).amax() < 1e-14);
        assert!(k.amax() < 1e-14);
    }

    #[test]
    fn dare_unstable_plant() {
        let a = dmatrix![1.2, 1.0; 0.0, 1.1];
        let b = dmatrix![0.0; 1.0];
        let (k, p) = lqr_gain(&a, &b, &DMatrix::identity(2, 2), &dmatrix![1.0]).unwrap();
        assert!(dare_residual(&a, &b, &DMatrix::identity(2, 2), &dmatrix![1.0], &p) < 1e-8);
        assert!(spectral_radius(&(&a - &b * k)).unwrap() < 1.0);
    }

    #[test]
    fn rejects_indefinite_weights() {
        let a = dcdc_a();
        let b = dmatrix![0.3; 0.06];
        assert!(solve_dare(&a, &b, &dmatrix![1.0, 0.0; 0.0, -1.0], &dmatrix![1.0]).is_err());
        assert!(solve_dare(&a, &b, &DMatrix::identity(2, 2), &dmatrix![0.0]).is_err());
    }
}
