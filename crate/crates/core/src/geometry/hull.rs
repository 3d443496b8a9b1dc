use nalgebra::{DMatrix, DVector};

use super::Polytope;
use crate::error::{Error, Result};

/// H-representation of the convex hull of a point cloud in dimension ≤ 3.
///
/// Lower-dimensional clouds are handled in their affine hull: the
/// complement directions become equality pairs.
pub fn convex_hull(points: &[DVector<f64>]) -> Result<Polytope> {
    let Some(first) = points.first() else {
        return Err(Error::InvalidInput("convex hull of no points".into()));
    };
    let n = first.len();
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput("points of mixed dimension".into()));
    }
    if n > 3 {
        return Err(Error::Unsupported(format!("convex hull in dimension {n}")));
    }
    let k = points.len();
    let center = points.iter().fold(DVector::zeros(n), |a, p| a + p) / k as f64;
    let mut centered = DMatrix::zeros(n, k);
    for (j, p) in points.iter().enumerate() {
        centered.set_column(j, &(p - &center));
    }
    let scale = centered.amax().max(center.amax()).max(1.0);
    let svd = centered.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let tol = 1e-10 * scale * (k as f64).sqrt();
    let rank = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > tol)
        .count();
    // Orthonormal basis of Rⁿ: first `rank` columns span the cloud.
    let mut basis = DMatrix::zeros(n, n);
    for (c, &i) in order.iter().enumerate() {
        basis.set_column(c, &u.column(i));
    }
    complete_basis(&mut basis, order.len());
    let ur = basis.columns(0, rank).into_owned();
    let reduced: Vec<DVector<f64>> = points
        .iter()
        .map(|p| ur.transpose() * (p - &center))
        .collect();

    let faces: Vec<(DVector<f64>, f64)> = match rank {
        0 => Vec::new(),
        1 => {
            let lo = reduced.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = reduced.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            vec![(DVector::from_element(1, 1.0), hi), (DVector::from_element(1, -1.0), -lo)]
        }
        2 => hull_2d(&reduced),
        _ => hull_3d(&reduced, 1e-9 * scale),
    };

    let mut rows: Vec<DVector<f64>> = Vec::new();
    let mut offsets: Vec<f64> = Vec::new();
    for (a, b) in faces {
        let normal = &ur * &a;
        rows.push(normal.clone());
        offsets.push(b + normal.dot(&center));
    }
    for c in rank..n {
        let d = basis.column(c).into_owned();
        let v = d.dot(&center);
        rows.push(d.clone());
        offsets.push(v);
        rows.push(-d);
        offsets.push(-v);
    }
    let f = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    Polytope::new(f, DVector::from_vec(offsets)).map(|p| p.normalized())
}

/// Fill columns `from..n` with an orthonormal complement (Gram–Schmidt on
/// the identity).
fn complete_basis(basis: &mut DMatrix<f64>, from: usize) {
    let n = basis.nrows();
    let mut filled = from;
    for e in 0..n {
        if filled == n {
            break;
        }
        let mut v = DVector::zeros(n);
        v[e] = 1.0;
        for c in 0..filled {
            let col = basis.column(c).into_owned();
            v -= &col * col.dot(&v);
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.set_column(filled, &(v / norm));
            filled += 1;
        }
    }
}

fn cross(o: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Counter-clockwise hull vertices by Andrew's monotone chain.
pub(crate) fn monotone_chain(points: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut pts: Vec<DVector<f64>> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup_by(|a, b| (&*a - &*b).amax() <= 1e-14);
    if pts.len() < 3 {
        return pts;
    }
    let scale = pts.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let eps = 1e-12 * scale * scale;
    let mut hull: Vec<DVector<f64>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let seq: Box<dyn Iterator<Item = &DVector<f64>>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in seq {
            while hull.len() >= start + 2
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= eps
            {
                hull.pop();
            }
            hull.push(p.clone());
        }
        hull.pop();
    }
    hull
}

fn hull_2d(points: &[DVector<f64>]) -> Vec<(DVector<f64>, f64)> {
    let h = monotone_chain(points);
    let mut faces = Vec::with_capacity(h.len());
    for i in 0..h.len() {
        let (a, b) = (&h[i], &h[(i + 1) % h.len()]);
        // Outward normal of a counter-clockwise edge.
        let normal = DVector::from_vec(vec![b[1] - a[1], a[0] - b[0]]);
        let len = normal.norm();
        if len <= 1e-300 {
            continue;
        }
        let normal = normal / len;
        let offset = normal.dot(a);
        faces.push((normal, offset));
    }
    faces
}

/// Facets of a full-dimensional 3-D cloud by testing every point triple.
fn hull_3d(points: &[DVector<f64>], tol: f64) -> Vec<(DVector<f64>, f64)> {
    let mut pts: Vec<DVector<f64>> = Vec::new();
    for p in points {
        if !pts.iter().any(|q| (q - p).amax() <= 1e-12) {
            pts.push(p.clone());
        }
    }
    let k = pts.len();
    let mut faces: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            for l in j + 1..k {
                let n = (&pts[j] - &pts[i]).cross(&(&pts[l] - &pts[i]));
                let len = n.norm();
                if len <= 1e-12 {
                    continue;
                }
                let mut n = n / len;
                let mut d = n.dot(&pts[i]);
                let (mut above, mut below) = (false, false);
                for p in &pts {
                    let s = n.dot(p) - d;
                    above |= s > tol;
                    below |= s < -tol;
                }
                if above && below {
                    continue;
                }
                if above {
                    n = -n;
                    d = -d;
                }
                let known = faces
                    .iter()
                    .any(|(m, e)| (m - &n).amax() <= 1e-9 && (e - d).abs() <= tol);
                if !known {
                    faces.push((n, d));
                }
            }
        }
    }
    faces
}
