#![allow(dead_code)]

use cvpm::controller::CvpmProblem;
use cvpm::geometry::{convex_hull, Polytope};
use cvpm::Result;
use nalgebra::{dvector, DVector};

pub fn dcdc() -> CvpmProblem {
    cvpm::sim::builtin_dcdc_scenario().build_problem().unwrap()
}

pub fn box2(cx: f64, cy: f64, hx: f64, hy: f64) -> Polytope {
    Polytope::from_box(&dvector![cx - hx, cy - hy], &dvector![cx + hx, cy + hy]).unwrap()
}

/// `None` for (nearly) degenerate triangles.
pub fn triangle(p: [[f64; 2]; 3]) -> Option<Polytope> {
    let [a, b, c] = p;
    let area = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs() / 2.0;
    if area < 1e-2 {
        return None;
    }
    let pts: Vec<DVector<f64>> = p.iter().map(|q| dvector![q[0], q[1]]).collect();
    Some(convex_hull(&pts).unwrap())
}

/// Slacks of `A ⊆ (A ⊕ B) ⊖ B` and, when `A ⊖ B` is nonempty,
/// `(A ⊖ B) ⊕ B ⊆ A`.
pub fn duality_slacks(a: &Polytope, b: &Polytope) -> Result<(f64, Option<f64>)> {
    let sum = a.minkowski_sum(b)?;
    let back = sum.pontryagin_diff(b)?;
    let s1 = back.inclusion_slack(a)?;
    let diff = a.pontryagin_diff(b)?;
    if diff.is_empty()? {
        return Ok((s1, None));
    }
    let re = diff.minkowski_sum(b)?;
    Ok((s1, Some(a.inclusion_slack(&re)?)))
}

/// Disagreements between membership in the explicit projection onto the
/// first two coordinates and the completion LP, over a grid. Points within
/// `band` of the projection boundary are skipped.
pub fn projection_disagreements(p: &Polytope, grid: usize, band: f64) -> Result<usize> {
    let proj = p.project(&[0, 1])?.normalized();
    let (lo, hi) = (
        p.bounding_box()?.0.rows(0, 2).into_owned(),
        p.bounding_box()?.1.rows(0, 2).into_owned(),
    );
    let mut bad = 0;
    for i in 0..grid {
        for j in 0..grid {
            let s = i as f64 / (grid - 1) as f64;
            let t = j as f64 / (grid - 1) as f64;
            let x = dvector![
                lo[0] - 0.2 + s * (hi[0] - lo[0] + 0.4),
                lo[1] - 0.2 + t * (hi[1] - lo[1] + 0.4)
            ];
            let v = proj.max_violation(&x)?;
            if v.abs() <= band {
                continue;
            }
            if (v <= 0.0) != p.exists_completion(&[0, 1], &x, 0.0)? {
                bad += 1;
            }
        }
    }
    Ok(bad)
}

/// A sheared 3-D box.
pub fn sheared_box(half: [f64; 3], shear: [f64; 3]) -> Polytope {
    let b = Polytope::from_box(
        &dvector![-half[0], -half[1], -half[2]],
        &dvector![half[0], half[1], half[2]],
    )
    .unwrap();
    let m = nalgebra::dmatrix![
        1.0, shear[0], shear[1];
        0.0, 1.0, shear[2];
        shear[2], 0.0, 1.0
    ];
    b.affine_image(&m).unwrap()
}
