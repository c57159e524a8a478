//! Intensity evaluation and closed-form compensators for the exponential kernel.

use crate::error::{Error, Result};

use super::{Event, EventSequence, HawkesModel};

/// Excitation carried by a history: `r_i(t) = sum_j alpha_ij sum_{t_j} exp(-omega (t - t_j))`.
///
/// The state is right-continuous: events absorbed at `time` are included.
/// Because the kernel is shared, the whole vector decays by one scalar factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessState {
    time: f64,
    excitation: Vec<f64>,
}

impl ProcessState {
    /// State with no past events.
    pub fn quiet(model: &HawkesModel, time: f64) -> Self {
        Self {
            time,
            excitation: vec![0.0; model.dims()],
        }
    }

    /// Excitation at `time` from the events of `history` strictly before `time`.
    pub fn from_history(model: &HawkesModel, history: &EventSequence, time: f64) -> Self {
        let mut s = Self::quiet(model, history.start());
        let before = history.between(f64::NEG_INFINITY, time);
        s.advance(model, before, time);
        s
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn excitation(&self) -> &[f64] {
        &self.excitation
    }

    /// Absorbs `events` (times in `[self.time, to]`, sorted) and decays to `to`.
    pub fn advance(&mut self, model: &HawkesModel, events: &[Event], to: f64) {
        for e in events {
            self.decay_to(model.omega(), e.time);
            self.absorb(model, e.dim);
        }
        self.decay_to(model.omega(), to);
    }

    #[inline]
    pub(crate) fn decay_to(&mut self, omega: f64, t: f64) {
        let dt = t - self.time;
        if dt > 0.0 {
            let f = (-omega * dt).exp();
            for r in &mut self.excitation {
                *r *= f;
            }
        }
        self.time = t;
    }

    #[inline]
    pub(crate) fn absorb(&mut self, model: &HawkesModel, dim: usize) {
        for &(i, a) in model.column(dim) {
            self.excitation[i] += a;
        }
    }

    #[inline]
    pub fn intensity(&self, model: &HawkesModel, i: usize) -> f64 {
        model.mu()[i] + self.excitation[i]
    }

    /// Adds the compensator of every dimension over `[self.time, to]` to
    /// `out`, assuming no events in between, then decays to `to`.
    fn accumulate_mass(&mut self, model: &HawkesModel, to: f64, out: &mut [f64]) {
        let h = to - self.time;
        if h <= 0.0 {
            return;
        }
        let omega = model.omega();
        let frac = -(-omega * h).exp_m1() / omega;
        for ((o, &mu), &r) in out.iter_mut().zip(model.mu()).zip(&self.excitation) {
            *o += mu * h + r * frac;
        }
        self.decay_to(omega, to);
    }
}

fn check_dim(model: &HawkesModel, i: usize) -> Result<()> {
    if i >= model.dims() {
        return Err(Error::domain(format!(
            "dimension {i} out of range (M = {})",
            model.dims()
        )));
    }
    Ok(())
}

fn check_in_window(events: &EventSequence, t: f64) -> Result<()> {
    if !(t >= events.start() && t <= events.end()) {
        return Err(Error::domain(format!(
            "time {t} outside event window [{}, {}]",
            events.start(),
            events.end()
        )));
    }
    Ok(())
}

/// Left-limit intensity `lambda_i(t-)` given the events of the sequence
/// (no history before the window start).
pub fn intensity_at(model: &HawkesModel, events: &EventSequence, i: usize, t: f64) -> Result<f64> {
    intensity_at_from(model, &ProcessState::quiet(model, events.start()), events, i, t)
}

/// As [`intensity_at`], with `origin` carrying the excitation of events before the window.
pub fn intensity_at_from(
    model: &HawkesModel,
    origin: &ProcessState,
    events: &EventSequence,
    i: usize,
    t: f64,
) -> Result<f64> {
    check_dim(model, i)?;
    check_in_window(events, t)?;
    let omega = model.omega();
    let mut r = origin.excitation()[i] * (-omega * (t - origin.time())).exp();
    for e in events.between(f64::NEG_INFINITY, t) {
        let a = model.alpha(i, e.dim);
        if a > 0.0 {
            r += a * (-omega * (t - e.time)).exp();
        }
    }
    Ok(model.mu()[i] + r)
}

/// Closed-form `int_a^b lambda_i(s) ds` (no history before the window start).
pub fn integrated_intensity(model: &HawkesModel, events: &EventSequence, i: usize, a: f64, b: f64) -> Result<f64> {
    integrated_intensity_from(model, &ProcessState::quiet(model, events.start()), events, i, a, b)
}

pub fn integrated_intensity_from(
    model: &HawkesModel,
    origin: &ProcessState,
    events: &EventSequence,
    i: usize,
    a: f64,
    b: f64,
) -> Result<f64> {
    check_dim(model, i)?;
    if a > b {
        return Err(Error::domain(format!("integration bounds reversed: a = {a} > b = {b}")));
    }
    check_in_window(events, a)?;
    check_in_window(events, b)?;
    let omega = model.omega();
    // int_s^b exp(-omega (x - t)) dx = exp(-omega (s - t)) (1 - exp(-omega (b - s))) / omega
    let kernel_mass = |t: f64, s: f64| (-omega * (s - t)).exp() * -(-omega * (b - s)).exp_m1() / omega;
    let mut total = model.mu()[i] * (b - a) + origin.excitation()[i] * kernel_mass(origin.time(), a);
    for e in events.between(f64::NEG_INFINITY, b) {
        let w = model.alpha(i, e.dim);
        if w > 0.0 {
            total += w * kernel_mass(e.time, a.max(e.time));
        }
    }
    Ok(total)
}

/// Event counts per bin, `K x M` row-major. Bins are `[e_k, e_{k+1})`
/// except the last, which also holds events at its right edge.
pub fn bin_counts(events: &EventSequence, edges: &[f64]) -> Vec<f64> {
    let m = events.dims();
    let k = edges.len().saturating_sub(1);
    let mut out = vec![0.0; k * m];
    if k == 0 {
        return out;
    }
    for e in events.iter() {
        if e.time < edges[0] || e.time > edges[k] {
            continue;
        }
        let bin = edges.partition_point(|&x| x <= e.time).saturating_sub(1).min(k - 1);
        out[bin * m + e.dim] += 1.0;
    }
    out
}

/// Compensator of every dimension over every bin, `K x M` row-major.
///
/// `origin` is the excitation at the start of the event window; bins must
/// lie inside the window.
pub fn bin_masses(
    model: &HawkesModel,
    origin: &ProcessState,
    events: &EventSequence,
    edges: &[f64],
) -> Result<Vec<f64>> {
    let m = model.dims();
    if events.dims() != m {
        return Err(Error::invalid("event sequence and model dimensions differ"));
    }
    let k = edges.len().saturating_sub(1);
    let mut out = vec![0.0; k * m];
    if k == 0 {
        return Ok(out);
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("bin edges must be strictly increasing"));
    }
    let tol = 1e-9 * events.end().abs().max(1.0);
    if edges[0] < events.start() - tol || edges[k] > events.end() + tol || origin.time() > edges[0] + tol {
        return Err(Error::domain(format!(
            "bins [{}, {}] not inside event window [{}, {}]",
            edges[0],
            edges[k],
            events.start(),
            events.end()
        )));
    }
    let mut state = origin.clone();
    let evs = events.events();
    let mut idx = evs.partition_point(|e| e.time < edges[0]);
    state.advance(model, &evs[..idx], edges[0]);
    for b in 0..k {
        let row = &mut out[b * m..(b + 1) * m];
        let end = edges[b + 1];
        while idx < evs.len() && evs[idx].time < end {
            let e = evs[idx];
            state.accumulate_mass(model, e.time, row);
            state.decay_to(model.omega(), e.time);
            state.absorb(model, e.dim);
            idx += 1;
        }
        state.accumulate_mass(model, end, row);
    }
    Ok(out)
}
