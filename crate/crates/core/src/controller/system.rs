use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::geometry::Polytope;

/// `x⁺ = A x + B u + G w` with `w` a Gaussian `N(0, Σ_w)` truncated to `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub sigma_w: DMatrix<f64>,
    pub w: Polytope,
}

impl LinearSystem {
    /// Checks shapes and that `G` is square and invertible. Stability and the
    /// distributional assumptions are checked by the assumption report.
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        g: DMatrix<f64>,
        sigma_w: DMatrix<f64>,
        w: Polytope,
    ) -> Result<Self> {
        let nx = a.nrows();
        if nx == 0 || !a.is_square() {
            return Err(Error::InvalidInput("A must be a non-empty square matrix".into()));
        }
        if b.ncols() == 0 {
            return Err(Error::InvalidInput("B needs at least one column".into()));
        }
        check_dim(nx, b.nrows())?;
        if !g.is_square() {
            return Err(Error::InvalidInput("G must be square".into()));
        }
        check_dim(nx, g.nrows())?;
        check_dim(nx, sigma_w.nrows())?;
        check_dim(nx, sigma_w.ncols())?;
        check_dim(nx, w.dim())?;
        let sv = g.clone().singular_values();
        if sv.min() <= 1e-12 * sv.max() {
            return Err(Error::InvalidInput("G must be invertible".into()));
        }
        Ok(Self { a, b, g, sigma_w, w })
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn nw(&self) -> usize {
        self.g.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + &self.g * w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub x_ref: DVector<f64>,
    pub u_ref: DVector<f64>,
    /// Sampling time in seconds; metadata only.
    pub dt: f64,
}

impl MpcConfig {
    pub fn check_shapes(&self, system: &LinearSystem) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be ≥ 1".into()));
        }
        check_dim(system.nx(), self.q.nrows())?;
        check_dim(system.nx(), self.q.ncols())?;
        check_dim(system.nu(), self.r.nrows())?;
        check_dim(system.nu(), self.r.ncols())?;
        check_dim(system.nx(), self.x_ref.len())?;
        check_dim(system.nu(), self.u_ref.len())?;
        Ok(())
    }
}

/// Equilibrium pair closest to the requested references.
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyStateTarget {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    /// `‖A x_ref + B u_ref − x_ref‖_∞` of the requested pair.
    pub reference_residual: f64,
    pub adjusted: bool,
}

/// Tolerance below which the requested pair is taken as an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-6;

/// `argmin ‖x − x_ref‖²_Q + ‖u − u_ref‖²_R  s.t.  x = A x + B u`.
///
/// When the references are already an equilibrium they are returned as is.
pub fn steady_state_target(system: &LinearSystem, config: &MpcConfig) -> Result<SteadyStateTarget> {
    config.check_shapes(system)?;
    let (nx, nu) = (system.nx(), system.nu());
    let residual =
        (&system.a * &config.x_ref + &system.b * &config.u_ref - &config.x_ref).amax();
    if residual <= EQUILIBRIUM_TOL {
        return Ok(SteadyStateTarget {
            x: config.x_ref.clone(),
            u: config.u_ref.clone(),
            reference_residual: residual,
            adjusted: false,
        });
    }
    let n = nx + nu;
    let mut kkt = DMatrix::zeros(n + nx, n + nx);
    kkt.view_mut((0, 0), (nx, nx)).copy_from(&config.q);
    kkt.view_mut((nx, nx), (nu, nu)).copy_from(&config.r);
    let mut eq = DMatrix::zeros(nx, n);
    eq.view_mut((0, 0), (nx, nx))
        .copy_from(&(DMatrix::identity(nx, nx) - &system.a));
    eq.view_mut((0, nx), (nx, nu)).copy_from(&(-&system.b));
    kkt.view_mut((n, 0), (nx, n)).copy_from(&eq);
    kkt.view_mut((0, n), (n, nx)).copy_from(&eq.transpose());
    let mut rhs = DVector::zeros(n + nx);
    rhs.rows_mut(0, nx).copy_from(&(&config.q * &config.x_ref));
    rhs.rows_mut(nx, nu).copy_from(&(&config.r * &config.u_ref));
    let sol = kkt
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("no equilibrium pair exists for this system".into()))?;
    Ok(SteadyStateTarget {
        x: sol.rows(0, nx).into_owned(),
        u: sol.rows(nx, nu).into_owned(),
        reference_residual: residual,
        adjusted: true,
    })
}
