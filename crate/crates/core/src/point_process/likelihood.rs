use crate::error::{Error, Result};

use super::{EventSequence, HawkesModel, ProcessState};

/// Log-likelihood of `events` on their window:
/// `sum_i [ sum_{t in events_i} log lambda_i(t-) - int lambda_i ]`.
///
/// Returns `f64::NEG_INFINITY` when some event falls where its intensity is zero.
pub fn log_likelihood(model: &HawkesModel, events: &EventSequence) -> Result<f64> {
    log_likelihood_from(model, &ProcessState::quiet(model, events.start()), events)
}

/// As [`log_likelihood`], continuing the history summarized by `origin`.
pub fn log_likelihood_from(model: &HawkesModel, origin: &ProcessState, events: &EventSequence) -> Result<f64> {
    if events.dims() != model.dims() {
        return Err(Error::invalid(format!(
            "events have {} dimensions, model has {}",
            events.dims(),
            model.dims()
        )));
    }
    if origin.time() > events.start() {
        return Err(Error::domain("likelihood origin lies after the window start"));
    }
    let omega = model.omega();
    let mu = model.mu();
    let mut state = origin.clone();
    state.decay_to(omega, events.start());
    let mut log_sum = 0.0;
    let mut compensator = 0.0;
    let advance = |state: &mut ProcessState, to: f64, comp: &mut f64| {
        let h = to - state.time();
        if h > 0.0 {
            let frac = -(-omega * h).exp_m1() / omega;
            let total_r: f64 = state.excitation().iter().sum();
            *comp += mu.iter().sum::<f64>() * h + total_r * frac;
            state.decay_to(omega, to);
        }
    };
    for e in events.iter() {
        advance(&mut state, e.time, &mut compensator);
        let lam = state.intensity(model, e.dim);
        if lam <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log_sum += lam.ln();
        state.absorb(model, e.dim);
    }
    advance(&mut state, events.end(), &mut compensator);
    Ok(log_sum - compensator)
}
