use crate::error::{Error, Result};
use crate::point_process::{bin_masses, EventSequence, HawkesModel, IntensityControl, ProcessState};
use crate::policy::PiecewiseConstantPolicy;

/// `(log u + 1/u - 1) u = u log u + 1 - u`: nonnegative, zero only at `u = 1`.
#[inline]
pub fn control_cost_density(u: f64) -> f64 {
    u * u.ln() + 1.0 - u
}

/// Policy bins clipped to `[start, end]`, each paired with its source bin.
pub(crate) fn clipped_bins(policy: &PiecewiseConstantPolicy, start: f64, end: f64) -> (Vec<f64>, Vec<usize>) {
    let mut edges = vec![start];
    let mut source = Vec::new();
    for k in 0..policy.bins() {
        let (a, b) = (policy.edges()[k], policy.edges()[k + 1]);
        let last = k + 1 == policy.bins();
        if (b <= start && !last) || a >= end {
            continue;
        }
        let hi = if last { end } else { b.min(end) };
        if hi > *edges.last().unwrap() {
            edges.push(hi);
            source.push(k);
        }
    }
    (edges, source)
}

/// Pathwise control cost `C(u) = int sum_i (u_i log u_i + 1 - u_i) lambda_i dt`
/// over the window of `events`, with `lambda_i` the uncontrolled-form
/// intensity along that history. Closed form per bin.
pub fn control_cost(
    policy: &PiecewiseConstantPolicy,
    model: &HawkesModel,
    origin: &ProcessState,
    events: &EventSequence,
) -> Result<f64> {
    if policy.dims() != model.dims() {
        return Err(Error::invalid("policy and model dimensions differ"));
    }
    if !policy.covers(events.start(), events.end()) {
        return Err(Error::invalid("policy does not cover the event window"));
    }
    if events.end() <= events.start() {
        return Ok(0.0);
    }
    let (edges, source) = clipped_bins(policy, events.start(), events.end());
    let masses = bin_masses(model, origin, events, &edges)?;
    let m = model.dims();
    let mut total = 0.0;
    for (b, &k) in source.iter().enumerate() {
        for i in 0..m {
            let u = policy.value(k, i);
            if !(u > 0.0) {
                return Err(Error::domain(format!("multiplier {u} must be positive")));
            }
            total += control_cost_density(u) * masses[b * m + i];
        }
    }
    Ok(total)
}

const GAUSS_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GAUSS_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Pathwise KL rate integral `int sum_i [l~ log(l~ / l) - l~ + l] dt` for any
/// control, by Gauss-Legendre quadrature between events and control changes.
/// For multiplicative controls this equals [`control_cost`].
pub fn kl_rate_cost(
    model: &HawkesModel,
    origin: &ProcessState,
    events: &EventSequence,
    control: IntensityControl<'_>,
) -> Result<f64> {
    let dims = model.dims();
    let (start, end) = (events.start(), events.end());
    if end <= start {
        return Ok(0.0);
    }
    let segments = control.segments(dims, start, end)?;
    let omega = model.omega();
    let mu = model.mu();
    let max_piece = 0.5 / omega;
    let mut state = origin.clone();
    state.decay_to(omega, start);
    let evs = events.events();
    let mut next = evs.partition_point(|e| e.time < start);
    let mut t = start;
    let mut total = 0.0;
    for seg in &segments {
        loop {
            let stop = if next < evs.len() && evs[next].time < seg.end {
                evs[next].time
            } else {
                seg.end
            };
            // integrate [t, stop] with no events inside; r decays from `state`
            let span = stop - t;
            if span > 0.0 {
                let pieces = (span / max_piece).ceil().max(1.0) as usize;
                let h = span / pieces as f64;
                for p in 0..pieces {
                    let a = t + p as f64 * h;
                    for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                        let s = a + 0.5 * h * (node + 1.0);
                        let decay = (-omega * (s - state.time())).exp();
                        let mut f = 0.0;
                        for i in 0..dims {
                            let r = state.excitation()[i] * decay;
                            let lam = mu[i] + r;
                            let lt = seg.base[i] * mu[i] + seg.excite[i] * r;
                            f += if lt > 0.0 { lt * (lt / lam).ln() - lt + lam } else { lam };
                        }
                        total += 0.5 * h * weight * f;
                    }
                }
            }
            t = stop;
            if next < evs.len() && evs[next].time < seg.end {
                state.decay_to(omega, stop);
                state.absorb(model, evs[next].dim);
                next += 1;
            } else {
                break;
            }
        }
    }
    Ok(total)
}
