use nalgebra::{DMatrix, DVector};

use super::hull::monotone_chain;
use super::Polytope;
use crate::error::{Error, Result};

impl Polytope {
    /// Vertex list (dimension ≤ 3). Counter-clockwise in 2-D, ascending in 1-D.
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        let n = self.dim();
        if n > 3 {
            return Err(Error::Unsupported(format!("vertex enumeration in dimension {n}")));
        }
        if self.is_empty()? {
            return Ok(Vec::new());
        }
        // Boundedness along each axis also gives the scale for tolerances.
        let (lo, hi) = self.bounding_box()?;
        let scale = lo.amax().max(hi.amax()).max(1.0);
        let p = self.normalized().dedup_rows();
        let (f, g) = (p.f(), p.g());
        let m = p.n_rows();
        let tol = 1e-9 * scale;
        let mut out: Vec<DVector<f64>> = Vec::new();
        let mut push = |v: DVector<f64>| {
            if !out.iter().any(|w| (w - &v).amax() <= 1e-8 * scale) {
                out.push(v);
            }
        };
        let mut idx: Vec<usize> = (0..n).collect();
        if m >= n {
            loop {
                let a = DMatrix::from_fn(n, n, |r, c| f[(idx[r], c)]);
                let b = DVector::from_fn(n, |r, _| g[idx[r]]);
                let lu = a.full_piv_lu();
                if lu.determinant().abs() > 1e-10 {
                    if let Some(x) = lu.solve(&b) {
                        if (f * &x - g).max() <= tol {
                            push(x);
                        }
                    }
                }
                if !next_combination(&mut idx, m) {
                    break;
                }
            }
        }
        if out.is_empty() {
            // Single point with no full-rank active subset in canonical rows
            // cannot happen for a nonempty bounded set; fall back to the box.
            out.push((&lo + &hi) / 2.0);
        }
        match n {
            1 => out.sort_by(|a, b| a[0].total_cmp(&b[0])),
            2 => {
                if out.len() >= 3 {
                    out = monotone_chain(&out);
                }
            }
            _ => {}
        }
        Ok(out)
    }
}

fn next_combination(idx: &mut [usize], m: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < m - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
