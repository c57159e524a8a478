//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use ppcontrol::point_process::{Event, EventSequence, HawkesModel};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub fn test_rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
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
    simpson_rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + simpson_rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of a smooth integrand on `[a, b]`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let f: &dyn Fn(f64) -> f64 = &f;
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Quadrature of a function that is smooth between the given breakpoints.
pub fn piecewise_quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], tol)).sum()
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    golden_section_by(|c, d| f(c) - f(d), lo, hi, tol)
}

/// Golden-section search driven by the increment `diff(c, d) = f(c) - f(d)`,
/// so callers can supply an increment that avoids cancellation.
pub fn golden_section_by(diff: impl Fn(f64, f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    while (hi - lo).abs() > tol * (c.abs() + d.abs()).max(1e-300) {
        if diff(c, d) < 0.0 {
            hi = d;
            d = c;
            c = hi - r * (hi - lo);
        } else {
            lo = c;
            c = d;
            d = lo + r * (hi - lo);
        }
        if !(lo < c && c < d && d < hi) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Poisson probabilities `P(N = n)` for `n = 0..=max`, from the log pmf.
pub fn poisson_pmf(mean: f64, max: usize) -> Vec<f64> {
    let mut log_fact = 0.0;
    (0..=max)
        .map(|n| {
            if n > 0 {
                log_fact += (n as f64).ln();
            }
            (n as f64 * mean.ln() - mean - log_fact).exp()
        })
        .collect()
}

/// Direct-sum Hawkes intensity of dimension `i` at `t`, counting only
/// events strictly before `t`.
pub fn direct_intensity(model: &HawkesModel, events: &[Event], i: usize, t: f64) -> f64 {
    let w = model.omega();
    model.mu()[i]
        + events
            .iter()
            .filter(|e| e.time < t)
            .map(|e| model.alpha(i, e.dim) * (-w * (t - e.time)).exp())
            .sum::<f64>()
}

/// A random stationary Hawkes model and a random event sequence in `[0, end]`.
pub fn random_instance(rng: &mut impl Rng, dims: usize, events: usize, end: f64) -> (HawkesModel, EventSequence) {
    let omega = rng.random_range(0.3..3.0);
    let mu: Vec<f64> = (0..dims).map(|_| rng.random_range(0.05..2.0)).collect();
    let scale = 0.9 * omega / dims as f64;
    let alpha: Vec<f64> = (0..dims * dims).map(|_| rng.random_range(0.0..scale)).collect();
    let model = HawkesModel::new(mu, alpha, omega).unwrap();
    let mut times: Vec<f64> = (0..events).map(|_| rng.random_range(0.0..end)).collect();
    times.sort_by(f64::total_cmp);
    let evs = times
        .into_iter()
        .map(|time| Event {
            time,
            dim: rng.random_range(0..dims),
        })
        .collect();
    (model, EventSequence::new(dims, 0.0, end, evs).unwrap())
}
