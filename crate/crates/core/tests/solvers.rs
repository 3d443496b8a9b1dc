mod common;

use cvpm::lifting::build_lifted;
use cvpm::linalg::{dare_residual, dlyap_residual, lqr_gain, solve_dare, solve_dlyap, spectral_radius};
use cvpm::optimizers::{kkt_residual, solve_lp, solve_qp, LpProblem, QpProblem, StatusKind};
use nalgebra::{dmatrix, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dcdc_a() -> DMatrix<f64> {
    dmatrix![0.99, -0.02; 0.21, 0.92]
}
fn dcdc_b() -> DMatrix<f64> {
    dmatrix![0.30; 0.06]
}
fn dcdc_g() -> DMatrix<f64> {
    dmatrix![0.02, 0.0; 0.01, 0.19]
}

#[test]
fn spectral_radius_from_characteristic_polynomial() {
    // λ² − 1.91 λ + 0.915: complex pair, so |λ|² = det A.
    let rho = spectral_radius(&dcdc_a()).unwrap();
    assert!((rho - 0.915f64.sqrt()).abs() <= 1e-9, "{rho}");
}

#[test]
fn dare_against_riccati_recursion() {
    let (a, b) = (dcdc_a(), dcdc_b());
    let q = dmatrix![1.0, 0.0; 0.0, 5.0];
    let r = dmatrix![1.0];
    let p = solve_dare(&a, &b, &q, &r).unwrap();
    assert!(dare_residual(&a, &b, &q, &r, &p) <= 1e-8);
    let mut pk = q.clone();
    for _ in 0..20_000 {
        let btp = b.transpose() * &pk;
        let s = (&r + &btp * &b).try_inverse().unwrap();
        pk = a.transpose() * &pk * &a - a.transpose() * &pk * &b * s * &btp * &a + &q;
    }
    assert!((&p - &pk).amax() <= 1e-8 * p.amax(), "{p} vs {pk}");
    let (k, _) = lqr_gain(&a, &b, &q, &r).unwrap();
    assert!(spectral_radius(&(&a - &b * k)).unwrap() < 1.0);
}

#[test]
fn dlyap_against_series() {
    let (a, g) = (dcdc_a(), dcdc_g());
    let gsg = &g * (DMatrix::identity(2, 2) * 0.2) * g.transpose();
    let x = solve_dlyap(&a, &gsg).unwrap();
    assert!(dlyap_residual(&a, &gsg, &x) <= 1e-10);
    let mut sum = DMatrix::zeros(2, 2);
    let mut ak = DMatrix::identity(2, 2);
    for _ in 0..4000 {
        sum += &ak * &gsg * ak.transpose();
        ak = &a * ak;
    }
    assert!((&x - &sum).amax() <= 1e-12);
}

#[test]
fn dlyap_smith_path_large_system() {
    let n = 14;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let rho = spectral_radius(&a).unwrap();
    a /= 1.5 * rho;
    let q = DMatrix::identity(n, n);
    let x = solve_dlyap(&a, &q).unwrap();
    assert!(dlyap_residual(&a, &q, &x) <= 1e-10);
}

fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LpProblem {
    // Rows contain a box so the LP is bounded; the origin is feasible.
    let mut g = DMatrix::zeros(m + 2 * n, n);
    let mut h = DVector::zeros(m + 2 * n);
    for i in 0..m {
        for j in 0..n {
            g[(i, j)] = rng.random_range(-1.0..1.0);
        }
        h[i] = rng.random_range(0.1..2.0);
    }
    for j in 0..n {
        g[(m + 2 * j, j)] = 1.0;
        g[(m + 2 * j + 1, j)] = -1.0;
        h[m + 2 * j] = 3.0;
        h[m + 2 * j + 1] = 3.0;
    }
    let c = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    LpProblem::new(c, g, h).unwrap()
}

#[test]
fn lp_duality_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = rng.random_range(1..6);
        let m = rng.random_range(1..25);
        let lp = random_lp(&mut rng, n, m);
        let sol = solve_lp(&lp);
        assert_eq!(sol.status.kind, StatusKind::Optimal);
        let lam = sol.status.multipliers().unwrap();
        assert!(lam.min() >= -1e-9);
        // c + Gᵀλ = 0 and cᵀx = −hᵀλ.
        assert!((&lp.c + lp.g.transpose() * lam).amax() <= 1e-9);
        let gap = lp.c.dot(&sol.x) + lp.h.dot(lam);
        assert!(gap.abs() <= 1e-9 * (1.0 + sol.objective.abs()), "gap {gap}");
        assert!((&lp.g * &sol.x - &lp.h).max() <= 1e-9);
    }
}

#[test]
fn lp_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lp = random_lp(&mut rng, 4, 20);
    let a = solve_lp(&lp);
    let b = solve_lp(&lp);
    assert_eq!(a, b);
}

fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize, rank_deficient: bool) -> QpProblem {
    let k = if rank_deficient { n - 1 } else { n };
    let l = DMatrix::from_fn(n, k.max(1), |_, _| rng.random_range(-1.0..1.0));
    let h = &l * l.transpose();
    let f = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let lp = random_lp(rng, n, m);
    QpProblem::new(h, f, lp.g, lp.h).unwrap()
}

fn random_feasible_points(qp: &QpProblem, rng: &mut ChaCha8Rng, count: usize) -> Vec<DVector<f64>> {
    let n = qp.dim();
    let mut pts = Vec::with_capacity(count);
    while pts.len() < count {
        let z = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
        if qp.infeasibility(&z) <= 0.0 {
            pts.push(z);
        }
    }
    pts
}

#[test]
fn qp_beats_random_feasible_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..40 {
        let n = rng.random_range(2..5);
        let m = rng.random_range(1..8);
        let qp = random_qp(&mut rng, n, m, trial % 4 == 0);
        let sol = solve_qp(&qp).unwrap();
        assert_eq!(sol.status.kind, StatusKind::Optimal);
        assert!(sol.kkt_residual <= 1e-7);
        for z in random_feasible_points(&qp, &mut rng, 1000) {
            assert!(sol.objective <= qp.objective(&z) + 1e-9);
        }
    }
}

/// Brute force: every subset of active rows, equality-constrained solve,
/// keep primal-feasible points with nonnegative multipliers.
fn active_set_enumeration(qp: &QpProblem) -> (DVector<f64>, f64) {
    let n = qp.dim();
    let m = qp.g.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let rows: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if rows.len() > n {
            continue;
        }
        let k = rows.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&qp.h);
        let mut rhs = DVector::zeros(n + k);
        rhs.rows_mut(0, n).copy_from(&(-&qp.f));
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = qp.g[(i, j)];
                kkt[(j, n + r)] = qp.g[(i, j)];
            }
            rhs[n + r] = qp.h_ineq[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let z = sol.rows(0, n).into_owned();
        if sol.rows(n, k).iter().any(|&l| l < -1e-9) || qp.infeasibility(&z) > 1e-9 {
            continue;
        }
        let obj = qp.objective(&z);
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((z, obj));
        }
    }
    best.expect("convex QP with a feasible box has a KKT point")
}

#[test]
fn condensed_mpc_qp_matches_enumeration() {
    // Horizon-2 condensed tracking QP of the converter with input bounds and
    // state bounds on both predicted states.
    let lifted = build_lifted(&dcdc_a(), &dcdc_b(), &dcdc_g(), 2).unwrap();
    let q = dmatrix![1.0, 0.0; 0.0, 5.0];
    let mut qbar = DMatrix::zeros(4, 4);
    qbar.view_mut((0, 0), (2, 2)).copy_from(&q);
    qbar.view_mut((2, 2), (2, 2)).copy_from(&q);
    let h = (lifted.b_lift.transpose() * &qbar * &lifted.b_lift + DMatrix::identity(2, 2)) * 2.0;
    let h = (&h + h.transpose()) * 0.5;
    let x_ref = DVector::from_vec(vec![1.06, 3.30, 1.06, 3.30]);
    for x0 in [[1.1, 3.2], [1.6, 3.6], [0.5, 3.0]] {
        let x0 = DVector::from_row_slice(&x0);
        let free = &lifted.a_lift * &x0 - &x_ref;
        let f = lifted.b_lift.transpose() * &qbar * &free * 2.0;
        let mut g = DMatrix::zeros(12, 2);
        let mut hv = DVector::zeros(12);
        for k in 0..2 {
            g[(2 * k, k)] = 1.0;
            hv[2 * k] = 1.0;
            g[(2 * k + 1, k)] = -1.0;
        }
        let ax = &lifted.a_lift * &x0;
        let (lo, hi) = ([0.0, 2.8], [2.0, 3.8]);
        for s in 0..4 {
            let row = lifted.b_lift.row(s);
            g.row_mut(4 + 2 * s).copy_from(&row);
            hv[4 + 2 * s] = hi[s % 2] - ax[s];
            g.row_mut(5 + 2 * s).copy_from(&(-row));
            hv[5 + 2 * s] = ax[s] - lo[s % 2];
        }
        let qp = QpProblem::new(h.clone(), f, g, hv).unwrap();
        let sol = solve_qp(&qp).unwrap();
        let (z, obj) = active_set_enumeration(&qp);
        assert!((&sol.z - &z).amax() <= 1e-7, "{} vs {}", sol.z, z);
        assert!((sol.objective - obj).abs() <= 1e-9 * (1.0 + obj.abs()));
        assert!(sol.kkt_residual <= 1e-7);
        assert!(kkt_residual(&qp, &sol.z, sol.lambda().unwrap(), &DVector::zeros(0)) <= 1e-7);
    }
}

#[test]
fn qp_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let qp = random_qp(&mut rng, 4, 6, true);
    let a = solve_qp(&qp).unwrap();
    let b = solve_qp(&qp).unwrap();
    assert_eq!(a.z.as_slice(), b.z.as_slice());
    assert_eq!(a.working_set, b.working_set);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qp_matches_enumeration_small(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = random_qp(&mut rng, 2, 3, false);
        let sol = solve_qp(&qp).unwrap();
        let (_, obj) = active_set_enumeration(&qp);
        prop_assert!((sol.objective - obj).abs() <= 1e-8 * (1.0 + obj.abs()));
    }
}
