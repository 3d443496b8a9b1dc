//! Stacked prediction matrices over the horizon.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// `X = Ā x + B̄ U + Ḡ W` with `X = (x₁, …, x_N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedSystem {
    pub a_lift: DMatrix<f64>,
    pub b_lift: DMatrix<f64>,
    pub g_lift: DMatrix<f64>,
    pub horizon: usize,
    pub nx: usize,
    pub nu: usize,
    pub nw: usize,
}

pub fn build_lifted(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    g: &DMatrix<f64>,
    horizon: usize,
) -> Result<LiftedSystem> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be ≥ 1".into()));
    }
    let nx = a.nrows();
    check_dim(nx, a.ncols())?;
    check_dim(nx, b.nrows())?;
    check_dim(nx, g.nrows())?;
    let (nu, nw) = (b.ncols(), g.ncols());
    let mut powers = vec![DMatrix::identity(nx, nx)];
    for k in 1..=horizon {
        powers.push(a * &powers[k - 1]);
    }
    let mut a_lift = DMatrix::zeros(horizon * nx, nx);
    let mut b_lift = DMatrix::zeros(horizon * nx, horizon * nu);
    let mut g_lift = DMatrix::zeros(horizon * nx, horizon * nw);
    for k in 0..horizon {
        a_lift.view_mut((k * nx, 0), (nx, nx)).copy_from(&powers[k + 1]);
        for j in 0..=k {
            let p = &powers[k - j];
            b_lift
                .view_mut((k * nx, j * nu), (nx, nu))
                .copy_from(&(p * b));
            g_lift
                .view_mut((k * nx, j * nw), (nx, nw))
                .copy_from(&(p * g));
        }
    }
    Ok(LiftedSystem {
        a_lift,
        b_lift,
        g_lift,
        horizon,
        nx,
        nu,
        nw,
    })
}

impl LiftedSystem {
    /// Mean trajectory `Ā x + B̄ U`.
    pub fn predict_mean(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.nx, x.len())?;
        check_dim(self.horizon * self.nu, u.len())?;
        Ok(&self.a_lift * x + &self.b_lift * u)
    }

    /// State `k` (1-based step) of a stacked trajectory.
    pub fn block<'a>(&self, traj: &'a DVector<f64>, k: usize) -> nalgebra::DVectorView<'a, f64> {
        traj.rows((k - 1) * self.nx, self.nx)
    }
}

/// Block-diagonal inverse covariance of a stacked state trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCovariance {
    pub inverse_blocks: Vec<DMatrix<f64>>,
    /// Whether the last block is the terminal weight rather than `Σ_x⁻¹`.
    pub terminal_adapted: bool,
}

pub fn block_cov_inverse(
    sigma_x: &DMatrix<f64>,
    s: &DMatrix<f64>,
    horizon: usize,
    adapted: bool,
) -> Result<BlockCovariance> {
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be ≥ 1".into()));
    }
    let inv = sigma_x
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("Σ_x is not positive definite".into()))?
        .inverse();
    let inv = (&inv + inv.transpose()) * 0.5;
    let mut blocks = vec![inv; horizon];
    if adapted {
        check_dim(sigma_x.nrows(), s.nrows())?;
        if s.clone().cholesky().is_none() {
            return Err(Error::InvalidInput("S is not positive definite".into()));
        }
        blocks[horizon - 1] = s.clone();
    }
    Ok(BlockCovariance {
        inverse_blocks: blocks,
        terminal_adapted: adapted,
    })
}

impl BlockCovariance {
    pub fn dim(&self) -> usize {
        self.inverse_blocks.iter().map(|b| b.nrows()).sum()
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        let mut off = 0;
        for b in &self.inverse_blocks {
            let k = b.nrows();
            m.view_mut((off, off), (k, k)).copy_from(b);
            off += k;
        }
        m
    }

    /// `vᵀ Σ̲⁻¹ v`.
    pub fn mahalanobis(&self, v: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), v.len())?;
        let mut off = 0;
        let mut total = 0.0;
        for b in &self.inverse_blocks {
            let k = b.nrows();
            let seg = v.rows(off, k);
            total += seg.dot(&(b * seg));
            off += k;
        }
        Ok(total)
    }

    /// `log det Σ̲` of the covariance these blocks invert.
    pub fn log_det_covariance(&self) -> Result<f64> {
        let mut total = 0.0;
        for b in &self.inverse_blocks {
            let chol = b
                .clone()
                .cholesky()
                .ok_or_else(|| Error::InvalidInput("singular covariance block".into()))?;
            let l = chol.l();
            total -= 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        }
        Ok(total)
    }
}
