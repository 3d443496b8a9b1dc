//! Acceptance checks. One line per criterion: PASS/FAIL, the measured
//! quantity against its tolerance, and the wall time.

mod common;

use std::time::{Duration, Instant};

use common::{box2, dcdc, duality_slacks, triangle};
use cvpm::controller::{validate_assumptions, Case, CvpmProblem, Workspace};
use cvpm::geometry::Polytope;
use cvpm::linalg::{dare_residual, dlyap_residual, solve_dare, spectral_radius};
use cvpm::sim::{builtin_dcdc_scenario, render_trace, run_closed_loop, Method, TraceFormat};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sample_in(p: &Polytope, rng: &mut ChaCha8Rng, n: usize) -> Vec<DVector<f64>> {
    let (lo, hi) = p.bounding_box().unwrap();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = DVector::from_fn(lo.len(), |i, _| rng.random_range(lo[i]..hi[i]));
        if p.contains(&x, 0.0).unwrap() {
            out.push(x);
        }
    }
    out
}

fn random_triangle(rng: &mut ChaCha8Rng) -> Polytope {
    loop {
        let mut p = [[0.0; 2]; 3];
        for v in &mut p {
            *v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        }
        if let Some(t) = triangle(p) {
            return t;
        }
    }
}

fn c1_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    let mut grid_bad = 0usize;
    let mut grid_points = 0usize;
    for _ in 0..500 {
        let a = box2(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(0.2..2.0),
            rng.random_range(0.2..2.0),
        );
        let b = random_triangle(&mut rng);
        let (s1, s2) = duality_slacks(&a, &b).unwrap();
        worst = worst.min(s1).min(s2.unwrap_or(f64::INFINITY));

        // Projection of the lifted sum against its completion LP.
        let sum = a.minkowski_sum_implicit(&b).unwrap();
        let proj = sum.to_polytope().unwrap().normalized();
        let (lo, hi) = proj.bounding_box().unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let x = DVector::from_vec(vec![
                    lo[0] - 0.1 + (hi[0] - lo[0] + 0.2) * i as f64 / 7.0,
                    lo[1] - 0.1 + (hi[1] - lo[1] + 0.2) * j as f64 / 7.0,
                ]);
                let v = proj.max_violation(&x).unwrap();
                if v.abs() <= 1e-7 {
                    continue;
                }
                grid_points += 1;
                if (v <= 0.0) != sum.contains(&x, 0.0).unwrap() {
                    grid_bad += 1;
                }
            }
        }
    }
    outcome(
        worst >= -1e-7 && grid_bad == 0,
        format!(
            "500 pairs, worst containment slack {worst:.2e} (tol -1e-7), projection/LP disagreements {grid_bad} of {grid_points}"
        ),
    )
}

fn c2_residuals() -> Outcome {
    let p = dcdc();
    let (a, b) = (&p.system.a, &p.system.b);
    let pd = solve_dare(a, b, &p.config.q, &p.config.r).unwrap();
    let dare = dare_residual(a, b, &p.config.q, &p.config.r, &pd);
    let gsg = &p.system.g * &p.system.sigma_w * p.system.g.transpose();
    let dlyap = dlyap_residual(a, &gsg, &p.sigma_x);
    let rho = spectral_radius(a).unwrap();
    let rho_err = (rho - 0.915f64.sqrt()).abs();
    outcome(
        dare <= 1e-8 && dlyap <= 1e-10 && rho_err <= 1e-9,
        format!("DARE {dare:.2e} (≤1e-8), DLYAP {dlyap:.2e} (≤1e-10), |ρ(A) − √0.915| {rho_err:.2e} (≤1e-9)"),
    )
}

fn c3_assumptions() -> Outcome {
    let parts = builtin_dcdc_scenario().parts().unwrap();
    let r = validate_assumptions(&parts.system, &parts.config, &parts.x_p, &parts.u).unwrap();
    let passed = r.checks.iter().filter(|c| c.passed).count();
    let slack = r.rci_slack.unwrap_or(f64::NEG_INFINITY);
    outcome(
        passed == 6 && r.checks.len() == 6 && slack >= -1e-8,
        format!("{passed}/6 assumptions pass, terminal inclusion slack {slack:.2e} (≥ -1e-8)"),
    )
}

fn c4_invariance(p: &CvpmProblem) -> Outcome {
    let x_c1 = p.x_c1_absolute().normalized();
    let w_vertices = p.system.w.vertices().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ws = Workspace::default();
    let (mut failures, mut worst) = (0usize, f64::NEG_INFINITY);
    for x in sample_in(&x_c1, &mut rng, 200) {
        let o = p.solve_case1(&x, &mut ws).unwrap();
        for w in &w_vertices {
            let v = x_c1.max_violation(&p.system.step(&x, &o.u_applied, w)).unwrap();
            worst = worst.max(v);
            if v > 1e-6 {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0 && w_vertices.len() == 4,
        format!("200 states × {} vertices, {failures} failures, worst violation {worst:.2e} (tol 1e-6)", w_vertices.len()),
    )
}

/// Criteria 5 and 6 share the runs.
fn c5_c6_runs(p: &CvpmProblem) -> (Outcome, Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let starts = sample_in(&p.x_c1_absolute(), &mut rng, 20);
    let (mut steps, mut empty, mut errors) = (0usize, 0usize, 0usize);
    let (mut safe, mut cert_fail, mut worst) = (0usize, 0usize, f64::INFINITY);
    for (seed, x0) in starts.iter().enumerate() {
        let mut s = builtin_dcdc_scenario();
        s.events.clear();
        s.steps = 200;
        s.seed = seed as u64;
        s.x0 = x0.iter().copied().collect();
        let trace = match run_closed_loop(&s) {
            Ok(t) => t,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        let mut ws = Workspace::default();
        for r in &trace.steps {
            steps += 1;
            let x = DVector::from_column_slice(&r.x);
            if p.admissible_input_polytope(&x).unwrap().is_empty().unwrap() {
                empty += 1;
            }
            if r.case == Case::Safe {
                safe += 1;
                let o = p.solve_case1(&x, &mut ws).unwrap();
                let slack = p.zero_violation_slack(&x, &o.u_star).unwrap();
                worst = worst.min(slack);
                if slack < -1e-9 {
                    cert_fail += 1;
                }
            }
        }
    }
    (
        outcome(
            empty == 0 && errors == 0,
            format!("20 runs × 200 steps ({steps} steps), {empty} empty admissible sets, {errors} exceptions"),
        ),
        outcome(
            cert_fail == 0 && safe == steps,
            format!("{safe} safe steps, {cert_fail} certificate failures, min tube slack {worst:.3e} (tol -1e-9)"),
        ),
    )
}

fn c7_descent(p: &CvpmProblem) -> Outcome {
    let starts = [
        vec![2.4, 2.6],
        vec![0.2, 3.7],
        vec![1.9, 3.0],
        vec![-0.3, 2.7],
        vec![1.0, 4.1],
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for x0 in starts {
        let mut ws = Workspace::default();
        let mut x = DVector::from_vec(x0.clone());
        let mut last: Option<(Case, f64)> = None;
        let (mut c1_viol, mut c2_viol) = (0usize, 0usize);
        let mut converged = None;
        for t in 0..300 {
            let o = p.step(&x, &mut ws).unwrap();
            let err = (&x - &p.target.x).norm();
            if let Some((case, v)) = last {
                if case == o.case {
                    match case {
                        Case::Safe if err > 1e-6 && o.objective >= v => c1_viol += 1,
                        Case::Probabilistic if o.objective > v + 1e-9 * (1.0 + v) => c2_viol += 1,
                        _ => {}
                    }
                }
            }
            if converged.is_none() && err <= 1e-4 {
                converged = Some(t);
            }
            last = Some((o.case, o.objective));
            x = p.system.step(&x, &o.u_applied, &DVector::zeros(2));
        }
        pass &= c1_viol == 0 && c2_viol == 0 && converged.is_some();
        notes.push(format!(
            "({:.1},{:.1}): {c1_viol}/{c2_viol} violations, ‖x − x_s‖ ≤ 1e-4 at t = {}",
            x0[0],
            x0[1],
            converged.map_or("never".into(), |t| t.to_string())
        ));
    }
    outcome(pass, format!("5 starts, w ≡ 0; {}", notes.join("; ")))
}

fn c8_entry() -> Outcome {
    let mut pass = true;
    let mut entries = Vec::new();
    let (mut max_entry_p, mut min_start_p) = (0.0f64, 1.0f64);
    for seed in 0..10 {
        let mut s = builtin_dcdc_scenario();
        s.seed = seed;
        let trace = run_closed_loop(&s).unwrap();
        match trace.first_safe() {
            Some(t) if t > 0 && t <= 100 => {
                let p_entry = trace.steps[t - 1].p_violation;
                max_entry_p = max_entry_p.max(p_entry);
                entries.push(t);
            }
            _ => pass = false,
        }
        min_start_p = min_start_p.min(trace.steps[0].p_violation);
    }
    pass &= max_entry_p < 0.5 && min_start_p >= 0.99;
    outcome(
        pass,
        format!(
            "entry steps {entries:?} (≤ 100); p at start ≥ {min_start_p:.4} (≈1); p on the entering step ≤ {max_entry_p:.4} (< 0.5)"
        ),
    )
}

fn c9_methods() -> Outcome {
    let s = builtin_dcdc_scenario().with_steps(30);
    let qp = run_closed_loop(&s).unwrap();
    let mut mc = s.clone();
    mc.method = Method::Montecarlo;
    mc.mc_samples = 10_000;
    let mc = run_closed_loop(&mc).unwrap();
    let mut worst = 0.0f64;
    for (a, b) in qp.steps.iter().zip(&mc.steps) {
        let d = a.x.iter().zip(&b.x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d);
    }
    let evals: usize = mc.steps.iter().map(|r| r.evaluations).sum();
    outcome(
        worst <= 0.1,
        format!("max state deviation over 30 steps {worst:.3e} (≤ 0.1), {evals} Monte-Carlo evaluations"),
    )
}

fn c10_recovery() -> Outcome {
    let trace = match run_closed_loop(&builtin_dcdc_scenario()) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("aborted: {e}")),
    };
    let cases = trace.cases();
    let flip = cases[50] == Case::Safe && cases[51] == Case::Probabilistic;
    let back = cases[52..].iter().position(|&c| c == Case::Safe).map(|i| i + 52);
    let pass = flip && back.is_some_and(|t| t <= 101) && cases.len() == 100;
    outcome(
        pass,
        format!(
            "t = 50 {}, t = 51 {}, safe again at t = {} (≤ 101), {} steps without abort",
            cases[50].as_str(),
            cases[51].as_str(),
            back.map_or("never".into(), |t| t.to_string()),
            cases.len()
        ),
    )
}

fn c11_determinism() -> Outcome {
    let s = builtin_dcdc_scenario();
    let a = render_trace(&run_closed_loop(&s).unwrap(), TraceFormat::Csv);
    let b = render_trace(&run_closed_loop(&s).unwrap(), TraceFormat::Csv);
    outcome(a == b, format!("{} bytes, identical: {}", a.len(), a == b))
}

fn report(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            o.pass = false;
            o.detail.push_str(&format!("; over the {} s limit", limit.as_secs()));
        }
    }
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("{tag} {id:>2} {name}: {} [{:.2} s]", o.detail, elapsed.as_secs_f64());
    o.pass
}

fn main() {
    let p = dcdc();
    let mut all = true;
    all &= report(1, "geometry oracles", Some(Duration::from_secs(30)), c1_geometry);
    all &= report(2, "solver residuals", None, c2_residuals);
    all &= report(3, "assumption certificate", None, c3_assumptions);
    all &= report(4, "robust invariance", Some(Duration::from_secs(60)), || c4_invariance(&p));
    let start = Instant::now();
    let (c5, c6) = c5_c6_runs(&p);
    let shared = start.elapsed();
    all &= report(5, "recursive feasibility", None, || {
        let mut o = c5;
        o.detail.push_str(&format!("; runs took {:.2} s", shared.as_secs_f64()));
        o
    });
    all &= report(6, "zero-violation certificate", None, || c6);
    all &= report(7, "descent without disturbances", None, || c7_descent(&p));
    all &= report(8, "entry into the feasible set", None, c8_entry);
    all &= report(9, "QP vs sampling agreement", Some(Duration::from_secs(600)), c9_methods);
    all &= report(10, "unmodeled disturbance recovery", None, c10_recovery);
    all &= report(11, "determinism", None, c11_determinism);
    if !all {
        std::process::exit(1);
    }
}
