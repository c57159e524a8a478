use crate::cost::clipped_bins;
use crate::error::{Error, Result};
use crate::point_process::{bin_masses, EventSequence, HawkesModel, ProcessState};
use crate::policy::PiecewiseConstantPolicy;

/// Exponent of `dP/dQ(u)` on the window of `events`:
///
/// ```text
/// D(u) = sum_i [ int (u_i(s) - 1) lambda_i(s) ds - sum_{t in events_i} log u_i(t) ]
/// ```
///
/// Integrals are closed-form per bin along the given history.
pub fn likelihood_ratio_exponent(
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
    if let Some(u) = policy.values().iter().find(|u| !(**u > 0.0)) {
        return Err(Error::domain(format!("multiplier {u} must be positive")));
    }
    let m = model.dims();
    let mut total = 0.0;
    if events.end() > events.start() {
        let (edges, source) = clipped_bins(policy, events.start(), events.end());
        let masses = bin_masses(model, origin, events, &edges)?;
        for (b, &k) in source.iter().enumerate() {
            for i in 0..m {
                total += (policy.value(k, i) - 1.0) * masses[b * m + i];
            }
        }
    }
    for e in events.iter() {
        let u = policy
            .at(e.time, e.dim)
            .ok_or_else(|| Error::domain(format!("event at {} outside policy bins", e.time)))?;
        total -= u.ln();
    }
    Ok(total)
}
