use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::point_process::{bin_counts, bin_masses, EventSequence, HawkesModel, ProcessState};
use crate::policy::{ClampBounds, PiecewiseConstantPolicy};

use super::WeightedSampleBatch;

/// Samples per reduction chunk; fixed so the summation tree does not depend
/// on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Default)]
pub struct EstimatorConfig {
    pub bounds: ClampBounds,
    /// Dimensions the controller may change; the others stay at 1.
    pub controllable: Option<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub struct PolicyEstimate {
    pub policy: PiecewiseConstantPolicy,
    pub ess: f64,
    /// Weighted event counts per bin and dimension, `K x M`.
    pub weighted_counts: Vec<f64>,
    /// Weighted intensity masses per bin and dimension, `K x M`.
    pub weighted_masses: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Minimizer of `f(u) = a u - b log u` over `u > 0`, clamped: `b / a`, or
/// the lower bound when `b = 0`.
pub fn perbin_objective_min(a: f64, b: f64, bounds: ClampBounds) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::domain(format!("weighted intensity mass a = {a} must be > 0")));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::domain(format!("weighted event count b = {b} must be >= 0")));
    }
    if b == 0.0 {
        return Ok(bounds.min);
    }
    Ok(bounds.apply(b / a))
}

/// Weighted per-bin sums `(sum_m w_m N_m, sum_m w_m Lambda_m)` with a fixed
/// chunked compensated reduction.
pub(crate) fn weighted_bin_sums(
    events: &[EventSequence],
    weights: &[f64],
    model: &HawkesModel,
    origin: &ProcessState,
    edges: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let cells = (edges.len() - 1) * model.dims();
    let chunks: Vec<Result<(Vec<CompensatedSum>, Vec<CompensatedSum>)>> = events
        .par_chunks(CHUNK)
        .zip(weights.par_chunks(CHUNK))
        .enumerate()
        .map(|(c, (evs, ws))| {
            let mut num = vec![CompensatedSum::new(); cells];
            let mut den = vec![CompensatedSum::new(); cells];
            for (j, (ev, &w)) in evs.iter().zip(ws).enumerate() {
                let counts = bin_counts(ev, edges);
                let masses = bin_masses(model, origin, ev, edges).map_err(|e| Error::Sample {
                    index: c * CHUNK + j,
                    source: Box::new(e),
                })?;
                for cell in 0..cells {
                    if counts[cell] > 0.0 {
                        num[cell].add(w * counts[cell]);
                    }
                    den[cell].add(w * masses[cell]);
                }
            }
            Ok((num, den))
        })
        .collect();
    let mut num = vec![CompensatedSum::new(); cells];
    let mut den = vec![CompensatedSum::new(); cells];
    for chunk in chunks {
        let (n, d) = chunk?;
        for cell in 0..cells {
            num[cell].merge(&n[cell]);
            den[cell].merge(&d[cell]);
        }
    }
    Ok((
        num.iter().map(CompensatedSum::value).collect(),
        den.iter().map(CompensatedSum::value).collect(),
    ))
}

/// Sample-average estimate of the optimal piecewise-constant policy:
///
/// ```text
/// u_i^k = sum_m w_m N_i^m([t_k, t_{k+1})) / sum_m w_m int_{t_k}^{t_{k+1}} lambda_i^m(s) ds
/// ```
///
/// with `lambda^m` evaluated along sample `m`'s own history, clamped to the
/// configured bounds.
pub fn estimate_policy(
    batch: &WeightedSampleBatch,
    model: &HawkesModel,
    edges: &[f64],
    cfg: &EstimatorConfig,
) -> Result<PolicyEstimate> {
    cfg.bounds.validate()?;
    if batch.is_empty() {
        return Err(Error::invalid("cannot estimate a policy from an empty batch"));
    }
    let m = model.dims();
    if let Some(mask) = &cfg.controllable {
        if mask.len() != m {
            return Err(Error::invalid("controllable mask must have one entry per dimension"));
        }
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("bin edges must be strictly increasing"));
    }
    let (num, den) = weighted_bin_sums(batch.events(), batch.weights(), model, batch.origin(), edges)?;
    let bins = edges.len() - 1;
    let mut values = vec![1.0; bins * m];
    for k in 0..bins {
        for i in 0..m {
            if cfg.controllable.as_ref().is_some_and(|mask| !mask[i]) {
                continue;
            }
            let (b, a) = (num[k * m + i], den[k * m + i]);
            if !(a > 0.0) {
                return Err(Error::Estimation(format!(
                    "bin {k} [{}, {}), dimension {i}: zero weighted intensity mass",
                    edges[k],
                    edges[k + 1]
                )));
            }
            values[k * m + i] = perbin_objective_min(a, b, cfg.bounds)?;
        }
    }
    let mut warnings = Vec::new();
    let ess = batch.ess();
    if ess < 0.01 * batch.len() as f64 {
        let msg = format!("effective sample size {ess:.2} is below 1% of {} samples", batch.len());
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(PolicyEstimate {
        policy: PiecewiseConstantPolicy::new(edges.to_vec(), m, values)?,
        ess,
        weighted_counts: num,
        weighted_masses: den,
        warnings,
    })
}
