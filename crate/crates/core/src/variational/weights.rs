use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::point_process::{EventSequence, ProcessState};
use crate::sde::{Rollout, Trajectory};

/// Samples from the uncontrolled law with their optimal-measure weights
/// `w_m = exp(-(S_m - min S) / gamma)`.
#[derive(Debug, Clone)]
pub struct WeightedSampleBatch {
    events: Vec<EventSequence>,
    costs: Vec<f64>,
    log_weights: Vec<f64>,
    weights: Vec<f64>,
    ess: f64,
    origin: ProcessState,
    gamma: f64,
}

/// Log-weights and weights for costs `S_m`.
///
/// The shift is applied in cost space, `-(S_m - S_min) / gamma`, so the largest
/// weight is exactly 1. Adding a constant to every cost, or scaling costs and
/// `gamma` together, leaves the weights unchanged whenever the shifted or
/// scaled costs are exactly representable.
pub fn compute_weights(costs: &[f64], gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if costs.is_empty() {
        return Err(Error::invalid("weights need at least one sample"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma = {gamma} must be > 0")));
    }
    if let Some(m) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::Sample {
            index: m,
            source: Box::new(Error::Estimation(format!("state cost {} is not finite", costs[m]))),
        });
    }
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let log_weights: Vec<f64> = costs.iter().map(|c| -(c - min) / gamma).collect();
    let weights = log_weights.iter().map(|l| l.exp()).collect();
    Ok((log_weights, weights))
}

/// `(sum w)^2 / sum w^2`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let mut s = CompensatedSum::new();
    let mut s2 = CompensatedSum::new();
    for &w in weights {
        s.add(w);
        s2.add(w * w);
    }
    let s2 = s2.value();
    if s2 > 0.0 {
        s.value() * s.value() / s2
    } else {
        0.0
    }
}

impl WeightedSampleBatch {
    pub fn new(events: Vec<EventSequence>, costs: Vec<f64>, origin: ProcessState, gamma: f64) -> Result<Self> {
        if events.len() != costs.len() {
            return Err(Error::invalid("one cost per event sequence"));
        }
        if let Some(first) = events.first() {
            if events
                .iter()
                .any(|e| e.start() != first.start() || e.end() != first.end())
            {
                return Err(Error::invalid("samples must share one window"));
            }
        }
        let (log_weights, weights) = compute_weights(&costs, gamma)?;
        let ess = effective_sample_size(&weights);
        Ok(Self {
            events,
            costs,
            log_weights,
            weights,
            ess,
            origin,
            gamma,
        })
    }

    pub fn from_rollouts(rollouts: Vec<Rollout>, origin: ProcessState, gamma: f64) -> Result<Self> {
        let (events, costs) = rollouts.into_iter().map(|r| (r.events, r.cost)).unzip();
        Self::new(events, costs, origin, gamma)
    }

    pub fn from_trajectories(trajectories: &[Trajectory], spec: &CostSpec) -> Result<Self> {
        let first = trajectories
            .first()
            .ok_or_else(|| Error::invalid("weights need at least one sample"))?;
        let costs = trajectories
            .iter()
            .map(|t| spec.state_cost(t))
            .collect::<Result<Vec<_>>>()?;
        let events = trajectories.iter().map(|t| t.events().clone()).collect();
        Self::new(events, costs, first.origin().clone(), spec.gamma())
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn events(&self) -> &[EventSequence] {
        &self.events
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn origin(&self) -> &ProcessState {
        &self.origin
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Sample estimate of `dQ*/dP` at each sample: `w_m / mean(w)`.
    pub fn densities(&self) -> Vec<f64> {
        let mean = self.weights.iter().copied().collect::<CompensatedSum>().value() / self.len() as f64;
        self.weights.iter().map(|w| w / mean).collect()
    }
}
