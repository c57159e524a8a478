//! Exact sampling of (controlled) multivariate Hawkes processes by Ogata thinning.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::policy::PiecewiseConstantPolicy;
use crate::rng::SeedStream;

use super::{Event, EventSequence, HawkesModel, ProcessState};

/// How the sampled intensity is modified.
#[derive(Debug, Clone, Copy, Default)]
pub enum IntensityControl<'a> {
    #[default]
    None,
    /// `lambda~_i(t) = u_i(t) lambda_i(t)`.
    Multiplicative(&'a PiecewiseConstantPolicy),
    /// `lambda~_i(t) = c_i mu_i + (lambda_i(t) - mu_i)`: only base rates are scaled.
    BaseRate(&'a [f64]),
}

/// A stretch of the window on which the control is constant:
/// `lambda~_i = base[i] * mu_i + excite[i] * r_i`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Segment {
    pub end: f64,
    pub base: Vec<f64>,
    pub excite: Vec<f64>,
}

impl IntensityControl<'_> {
    /// Splits `[start, end)` into constant-control segments. Adjacent policy
    /// bins with identical multipliers are merged, so an all-ones policy
    /// yields the same single segment as no control.
    pub(crate) fn segments(&self, dims: usize, start: f64, end: f64) -> Result<Vec<Segment>> {
        match *self {
            IntensityControl::None => Ok(vec![Segment {
                end,
                base: vec![1.0; dims],
                excite: vec![1.0; dims],
            }]),
            IntensityControl::BaseRate(c) => {
                if c.len() != dims {
                    return Err(Error::invalid("base-rate control needs one multiplier per dimension"));
                }
                if c.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
                    return Err(Error::invalid("base-rate multipliers must be positive"));
                }
                Ok(vec![Segment {
                    end,
                    base: c.to_vec(),
                    excite: vec![1.0; dims],
                }])
            }
            IntensityControl::Multiplicative(policy) => {
                if policy.dims() != dims {
                    return Err(Error::invalid(format!(
                        "policy has {} dimensions, process has {dims}",
                        policy.dims()
                    )));
                }
                if !policy.covers(start, end) {
                    return Err(Error::invalid(format!(
                        "policy bins [{}, {}] leave a gap in window [{start}, {end}]",
                        policy.start(),
                        policy.end()
                    )));
                }
                let mut out: Vec<Segment> = Vec::new();
                let first = policy.bin_index(start.max(policy.start())).unwrap_or(0);
                for k in first..policy.bins() {
                    let seg_end = policy.edges()[k + 1].min(end);
                    let row = policy.row(k);
                    match out.last_mut() {
                        Some(last) if last.base == row => last.end = seg_end,
                        _ => out.push(Segment {
                            end: seg_end,
                            base: row.to_vec(),
                            excite: row.to_vec(),
                        }),
                    }
                    if seg_end >= end {
                        break;
                    }
                }
                if let Some(last) = out.last_mut() {
                    last.end = end;
                }
                Ok(out)
            }
        }
    }
}

/// Events allowed in one sampled window before sampling gives up with
/// [`Error::EventLimit`].
pub const MAX_EVENTS: usize = 1_000_000;

/// Samples events on `[start, end)` of a process with no history before `start`.
pub fn sample_thinning(
    model: &HawkesModel,
    start: f64,
    end: f64,
    stream: &SeedStream,
    control: IntensityControl<'_>,
) -> Result<EventSequence> {
    sample_thinning_from(model, &ProcessState::quiet(model, start), end, stream, control)
}

/// Samples events on `[origin.time(), end)` continuing the history summarized by `origin`.
///
/// Between events every `r_i` decays, so the total controlled intensity at
/// the current time bounds it until the next event or control change. A
/// candidate `tau = t + Exp(bound)` is accepted with probability
/// `lambda~(tau) / bound` and assigned to dimension `i` with probability
/// `lambda~_i(tau) / lambda~(tau)`; the bound is refreshed after every
/// candidate. Crossing a segment boundary restarts the proposal there,
/// which is exact by memorylessness.
pub fn sample_thinning_from(
    model: &HawkesModel,
    origin: &ProcessState,
    end: f64,
    stream: &SeedStream,
    control: IntensityControl<'_>,
) -> Result<EventSequence> {
    let start = origin.time();
    let dims = model.dims();
    if !(start.is_finite() && end.is_finite() && start <= end) {
        return Err(Error::invalid(format!("bad sampling window [{start}, {end}]")));
    }
    let segments = control.segments(dims, start, end)?;
    let omega = model.omega();
    let mu = model.mu();
    let mut rng = stream.rng();
    let mut state = origin.clone();
    let mut events = Vec::new();
    let mut t = start;

    for seg in &segments {
        let base_total: f64 = seg.base.iter().zip(mu).map(|(c, m)| c * m).sum();
        // excitation total at `state.time()`; decays by exp(-omega dt) until the next event
        let mut excite_total: f64 = seg.excite.iter().zip(state.excitation()).map(|(c, r)| c * r).sum();
        loop {
            let bound = base_total + excite_total * (-omega * (t - state.time())).exp();
            if !bound.is_finite() {
                return Err(Error::Simulation {
                    time: t,
                    reason: format!("non-finite thinning bound {bound}"),
                });
            }
            if bound <= 0.0 {
                break;
            }
            let gap: f64 = Exp1.sample(&mut rng);
            let tau = t + gap / bound;
            if tau >= seg.end {
                break;
            }
            let level = rng.random::<f64>() * bound;
            let total_at_tau = base_total + excite_total * (-omega * (tau - state.time())).exp();
            t = tau;
            if level >= total_at_tau {
                continue;
            }
            state.decay_to(omega, tau);
            let mut acc = 0.0;
            let mut chosen = None;
            for i in 0..dims {
                let lam = seg.base[i] * mu[i] + seg.excite[i] * state.excitation()[i];
                if lam > 0.0 {
                    acc += lam;
                    chosen = Some(i);
                    if level < acc {
                        break;
                    }
                }
            }
            let Some(dim) = chosen else {
                continue;
            };
            if events.len() == MAX_EVENTS {
                return Err(Error::EventLimit {
                    time: tau,
                    limit: MAX_EVENTS,
                });
            }
            events.push(Event { time: tau, dim });
            state.absorb(model, dim);
            excite_total = seg.excite.iter().zip(state.excitation()).map(|(c, r)| c * r).sum();
        }
        t = seg.end;
        state.decay_to(omega, t);
    }
    Ok(EventSequence::from_sorted(dims, start, end, events))
}
