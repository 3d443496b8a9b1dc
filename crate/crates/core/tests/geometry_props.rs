mod common;

use common::{box2, duality_slacks, projection_disagreements, sheared_box, triangle};
use cvpm::geometry::Polytope;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn boxes() -> impl Strategy<Value = Polytope> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..2.0f64, 0.2..2.0f64)
        .prop_map(|(cx, cy, hx, hy)| box2(cx, cy, hx, hy))
}

fn triangles() -> impl Strategy<Value = Polytope> {
    prop::array::uniform3(prop::array::uniform2(-1.0..1.0f64))
        .prop_filter_map("degenerate", triangle)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn minkowski_pontryagin_duality(a in boxes(), b in triangles()) {
        let (s1, s2) = duality_slacks(&a, &b).unwrap();
        prop_assert!(s1 >= -1e-7, "A ⊄ (A ⊕ B) ⊖ B: {s1}");
        if let Some(s2) = s2 {
            prop_assert!(s2 >= -1e-7, "(A ⊖ B) ⊕ B ⊄ A: {s2}");
        }
    }

    #[test]
    fn duality_with_roles_swapped(a in triangles(), b in boxes()) {
        let b = b.translate(&-b.chebyshev_center().unwrap().0).unwrap();
        let (s1, s2) = duality_slacks(&a, &b).unwrap();
        prop_assert!(s1 >= -1e-7);
        if let Some(s2) = s2 {
            prop_assert!(s2 >= -1e-7);
        }
    }

    #[test]
    fn projection_matches_completion_lp(
        h in prop::array::uniform3(0.2..1.5f64),
        s in prop::array::uniform3(-0.8..0.8f64),
    ) {
        let p = sheared_box(h, s);
        prop_assert_eq!(projection_disagreements(&p, 15, 1e-7).unwrap(), 0);
    }

    #[test]
    fn preimage_membership(
        p in boxes(),
        m in prop::array::uniform4(-2.0..2.0f64),
        x in prop::array::uniform2(-3.0..3.0f64),
    ) {
        let m = dmatrix![m[0], m[1]; m[2], m[3]];
        let x = dvector![x[0], x[1]];
        let pre = p.affine_preimage(&m).unwrap();
        let direct = p.max_violation(&(&m * &x)).unwrap();
        if direct.abs() > 1e-9 {
            prop_assert_eq!(pre.contains(&x, 0.0).unwrap(), direct <= 0.0);
        }
    }

    #[test]
    fn box_volume(cx in -2.0..2.0f64, cy in -2.0..2.0f64, hx in 0.1..3.0f64, hy in 0.1..3.0f64) {
        let v = box2(cx, cy, hx, hy).volume_2d().unwrap();
        prop_assert!((v - 4.0 * hx * hy).abs() <= 1e-9 * (1.0 + v));
    }

    #[test]
    fn box_support(h in prop::array::uniform2(0.1..3.0f64), a in prop::array::uniform2(-2.0..2.0f64)) {
        let p = box2(0.0, 0.0, h[0], h[1]);
        let s = p.support(&dvector![a[0], a[1]]).unwrap();
        prop_assert!((s - a[0].abs() * h[0] - a[1].abs() * h[1]).abs() <= 1e-9);
    }

    #[test]
    fn redundancy_removal_preserves_membership(t in triangles(), b in boxes(), seed in any::<u64>()) {
        // Stack the triangle, the box and scaled copies of their rows.
        let mut f = DMatrix::zeros(0, 2);
        let mut g = DVector::zeros(0);
        for (p, scale) in [(&t, 1.0), (&b, 1.0), (&t, 1.5), (&b, 2.0)] {
            let n = f.nrows();
            f = f.insert_rows(n, p.n_rows(), 0.0);
            g = g.insert_rows(n, p.n_rows(), 0.0);
            f.view_mut((n, 0), (p.n_rows(), 2)).copy_from(p.f());
            g.rows_mut(n, p.n_rows()).copy_from(&(p.g() * scale));
        }
        let stacked = Polytope::new(f, g).unwrap();
        prop_assume!(!stacked.is_empty().unwrap());
        let reduced = stacked.remove_redundancy().unwrap();
        prop_assert!(reduced.n_rows() <= stacked.n_rows());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let norm_full = stacked.normalized();
        let norm_red = reduced.normalized();
        for _ in 0..1000 {
            let x = dvector![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let v = norm_full.max_violation(&x).unwrap();
            if v.abs() > 1e-8 {
                prop_assert_eq!(norm_red.max_violation(&x).unwrap() <= 0.0, v <= 0.0);
            }
        }
    }
}

#[test]
fn pontryagin_of_box_by_box_is_box() {
    let a = box2(0.0, 0.0, 2.0, 1.0);
    let b = box2(0.0, 0.0, 0.5, 0.25);
    let d = a.pontryagin_diff(&b).unwrap();
    assert!(d.set_eq(&box2(0.0, 0.0, 1.5, 0.75), 1e-9).unwrap());
}

#[test]
fn implicit_sum_agrees_with_explicit() {
    let a = box2(0.3, -0.2, 1.0, 0.5);
    let b = triangle([[0.0, 0.0], [1.0, 0.2], [0.1, 0.9]]).unwrap();
    let explicit = a.minkowski_sum(&b).unwrap();
    let implicit = a.minkowski_sum_implicit(&b).unwrap();
    assert!(explicit.set_eq(&implicit.to_polytope().unwrap(), 1e-8).unwrap());
    for dir in [dvector![1.0, 0.0], dvector![-0.3, 0.7], dvector![0.1, -1.0]] {
        let d = explicit.support(&dir).unwrap() - implicit.support(&dir).unwrap();
        assert!(d.abs() < 1e-9);
    }
}
