//! Nelder–Mead simplex search with projection onto a box.

use nalgebra::DVector;

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the simplex values span less than this.
    pub f_tol: f64,
    /// Stop when the simplex diameter drops below this.
    pub x_tol: f64,
    /// Initial edge length per coordinate.
    pub initial_step: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelderMeadResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub evals: usize,
    pub budget_exhausted: bool,
}

fn project(x: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

/// Minimize `f` over the box `[lo, hi]` from `x0`. Every trial point is
/// clamped into the box before evaluation. The returned value never exceeds
/// `f(x0)`.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    opts: &NelderMeadOptions,
) -> NelderMeadResult
where
    F: FnMut(&DVector<f64>) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &DVector<f64>, evals: &mut usize| {
        *evals += 1;
        f(x)
    };
    let mut start = x0.clone();
    project(&mut start, lo, hi);
    let mut simplex: Vec<(DVector<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(&start, &mut evals);
    simplex.push((start.clone(), f0));
    for i in 0..n {
        let mut v = start.clone();
        let step = opts.initial_step[i];
        v[i] += step;
        if v[i] > hi[i] {
            v[i] = start[i] - step;
        }
        project(&mut v, lo, hi);
        let fv = eval(&v, &mut evals);
        simplex.push((v, fv));
    }

    let mut exhausted = false;
    loop {
        // Stable sort keeps earlier vertices ahead on ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex
            .iter()
            .skip(1)
            .map(|(v, _)| (v - &simplex[0].0).amax())
            .fold(0.0, f64::max);
        if spread <= opts.f_tol && diameter <= opts.x_tol {
            break;
        }
        if evals + 1 > opts.max_evals {
            exhausted = true;
            break;
        }
        let centroid = simplex[..n]
            .iter()
            .fold(DVector::zeros(n), |acc, (v, _)| acc + v)
            / n as f64;
        let worst = simplex[n].clone();
        let point = |t: f64| {
            let mut p = &centroid + (&centroid - &worst.0) * t;
            project(&mut p, lo, hi);
            p
        };
        let xr = point(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = point(2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = point(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = point(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let mut v = &best + (&item.0 - &best) * 0.5;
            project(&mut v, lo, hi);
            let fv = eval(&v, &mut evals);
            *item = (v, fv);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    if fx <= f0 {
        NelderMeadResult {
            x,
            f: fx,
            evals,
            budget_exhausted: exhausted,
        }
    } else {
        NelderMeadResult {
            x: start,
            f: f0,
            evals,
            budget_exhausted: exhausted,
        }
    }
}
