//! Fourier–Motzkin projection.

use nalgebra::{DMatrix, DVector};

use super::Polytope;
use crate::error::{Error, Result};

/// Maximum number of rows any intermediate system may have.
pub const DEFAULT_ROW_BUDGET: usize = 20_000;

impl Polytope {
    /// `{x_keep : ∃ x_rest, x ∈ P}`, coordinates ordered as in `keep`.
    pub fn project(&self, keep: &[usize]) -> Result<Polytope> {
        self.project_with_budget(keep, DEFAULT_ROW_BUDGET)
    }

    pub fn project_with_budget(&self, keep: &[usize], budget: usize) -> Result<Polytope> {
        let n = self.dim();
        if keep.is_empty() {
            return Err(Error::InvalidInput("projection onto no coordinates".into()));
        }
        for (k, &j) in keep.iter().enumerate() {
            if j >= n || keep[..k].contains(&j) {
                return Err(Error::InvalidInput(format!("bad projection index {j}")));
            }
        }
        // Column order: kept coordinates first.
        let mut perm: Vec<usize> = keep.to_vec();
        perm.extend((0..n).filter(|j| !keep.contains(j)));
        let mut cur = Polytope::new(self.f().select_columns(perm.iter()), self.g().clone())?;
        cur = cur.normalized().dedup_rows();
        if cur.is_empty()? {
            return Ok(Polytope::empty(keep.len()));
        }
        while cur.dim() > keep.len() {
            let j = pick_variable(&cur, keep.len());
            cur = eliminate(&cur, j, budget)?;
            cur = cur.normalized();
            if cur.n_rows() == 0 || cur.is_empty()? {
                return Ok(Polytope::empty(keep.len()));
            }
            cur = cur.remove_redundancy()?;
        }
        Ok(cur)
    }
}

fn sign_counts(p: &Polytope, j: usize) -> (usize, usize) {
    let col = p.f().column(j);
    let pos = col.iter().filter(|v| **v > 1e-12).count();
    let neg = col.iter().filter(|v| **v < -1e-12).count();
    (pos, neg)
}

/// The eliminable column whose elimination produces the fewest rows.
fn pick_variable(p: &Polytope, first: usize) -> usize {
    (first..p.dim())
        .min_by_key(|&j| {
            let (pos, neg) = sign_counts(p, j);
            (pos * neg) as i64 - (pos + neg) as i64
        })
        .expect("at least one column to eliminate")
}

fn eliminate(p: &Polytope, j: usize, budget: usize) -> Result<Polytope> {
    let f = p.f();
    let g = p.g();
    let m = p.n_rows();
    let mut zero = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..m {
        let a = f[(i, j)];
        if a > 1e-12 {
            pos.push(i);
        } else if a < -1e-12 {
            neg.push(i);
        } else {
            zero.push(i);
        }
    }
    let total = zero.len() + pos.len() * neg.len();
    if total > budget {
        return Err(Error::ResourceLimit(format!(
            "Fourier–Motzkin step would create {total} rows (budget {budget})"
        )));
    }
    let cols: Vec<usize> = (0..p.dim()).filter(|&c| c != j).collect();
    let mut rows: Vec<DVector<f64>> = Vec::with_capacity(total);
    let mut offsets: Vec<f64> = Vec::with_capacity(total);
    for &i in &zero {
        rows.push(f.row(i).transpose().select_rows(cols.iter()));
        offsets.push(g[i]);
    }
    for &r in &pos {
        let a = f[(r, j)];
        for &s in &neg {
            let b = -f[(s, j)];
            let comb = f.row(r).transpose() / a + f.row(s).transpose() / b;
            rows.push(comb.select_rows(cols.iter()));
            offsets.push(g[r] / a + g[s] / b);
        }
    }
    if rows.is_empty() {
        // The eliminated coordinate was unconstrained in one direction
        // and nothing else remained: the shadow is the whole space.
        return Err(Error::Unbounded);
    }
    let k = cols.len();
    let fm = DMatrix::from_fn(rows.len(), k, |i, c| rows[i][c]);
    Polytope::new(fm, DVector::from_vec(offsets))
}
