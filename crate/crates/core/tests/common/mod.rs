//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;

/// Clamped knot vector on `[0, horizon]` with `interior` random distinct interior knots.
pub fn random_clamped_knots(rng: &mut impl Rng, degree: usize, interior: usize, horizon: f64) -> Vec<f64> {
    let mut inner: Vec<f64> = Vec::with_capacity(interior);
    while inner.len() < interior {
        let t = rng.gen_range(0.05..0.95) * horizon;
        if inner.iter().all(|&s| (s - t).abs() > 0.02 * horizon) {
            inner.push(t);
        }
    }
    inner.sort_by(f64::total_cmp);
    let mut knots = vec![0.0; degree + 1];
    knots.extend(inner);
    knots.extend(std::iter::repeat(horizon).take(degree + 1));
    knots
}

/// Textbook Cox–de Boor on half-open spans, valid for `t` strictly inside the range.
pub fn cox_de_boor(i: usize, p: usize, t: f64, tau: &[f64]) -> f64 {
    if p == 0 {
        return if tau[i] <= t && t < tau[i + 1] { 1.0 } else { 0.0 };
    }
    let mut acc = 0.0;
    let d0 = tau[i + p] - tau[i];
    if d0 > 0.0 {
        acc += (t - tau[i]) / d0 * cox_de_boor(i, p - 1, t, tau);
    }
    let d1 = tau[i + p + 1] - tau[i + 1];
    if d1 > 0.0 {
        acc += (tau[i + p + 1] - t) / d1 * cox_de_boor(i + 1, p - 1, t, tau);
    }
    acc
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, tol, 40)
}
