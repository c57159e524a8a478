//! Threshold-triggered heuristic: at a few observation times, compare the
//! instantaneous cost with a multiple of a reference run's cost and, if it
//! is higher, push the intensities in a fixed direction until a control
//! budget is spent.

use crate::cost::{CostKind, CostSpec};
use crate::error::{Error, Result};
use crate::mpc::{execute_bins, BinDecision, ControlConfig, ControlMode, ControlRun};
use crate::rng::SeedStream;
use crate::sde::{Dynamics, StartState, System};

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig {
    /// Trigger when cost exceeds `threshold` times the reference cost.
    pub threshold: f64,
    /// Number of observation times, spread evenly over the bins.
    pub observations: usize,
    /// Multiplier applied in the helpful direction; its inverse in the other.
    pub boost: f64,
    /// Total pathwise control cost allowed.
    pub budget: f64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            observations: 10,
            boost: 2.0,
            budget: f64::INFINITY,
        }
    }
}

impl GreedyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold >= 1.0 && self.threshold.is_finite()) {
            return Err(Error::invalid(format!(
                "greedy threshold {} must be >= 1",
                self.threshold
            )));
        }
        if self.observations == 0 {
            return Err(Error::invalid("greedy needs at least one observation"));
        }
        if !(self.boost > 0.0 && self.boost.is_finite()) {
            return Err(Error::invalid(format!("greedy boost {} must be > 0", self.boost)));
        }
        if !(self.budget >= 0.0) {
            return Err(Error::invalid("greedy budget must be >= 0"));
        }
        Ok(())
    }
}

/// Bins at which the controller looks at the state: `floor(j K / n)`.
pub fn observation_bins(bins: usize, observations: usize) -> Vec<usize> {
    let n = observations.min(bins);
    let mut out: Vec<usize> = (0..n).map(|j| j * bins / n).collect();
    out.dedup();
    out
}

/// Multipliers the greedy rule applies in state `x`.
///
/// Opinion dynamics: an event of user `j` moves its neighbours along
/// `sign(x_j)`, so users whose opinion points the way the cost wants the
/// total opinion to go get `boost`, the rest `1 / boost`. Broadcast: the
/// broadcaster is boosted. Other combinations have no rule and stay at 1.
pub fn greedy_direction(system: &System, cost: &CostSpec, x: &[f64], boost: f64) -> Vec<f64> {
    let m = system.process().dims();
    let mut u = vec![1.0; m];
    match system.dynamics() {
        Dynamics::Opinion(_) => {
            let want = match cost.kind() {
                CostKind::LeastSquares { target } => {
                    let gap: f64 = target.iter().zip(x).map(|(a, xi)| a - xi).sum();
                    gap.signum()
                }
                CostKind::InfluenceMax => 1.0,
                _ => 0.0,
            };
            if want != 0.0 {
                for (i, ui) in u.iter_mut().enumerate() {
                    if system.controllable()[i] && x[i] != 0.0 {
                        *ui = if x[i].signum() == want { boost } else { 1.0 / boost };
                    }
                }
            }
        }
        Dynamics::Broadcast(_) => {
            for (i, ui) in u.iter_mut().enumerate() {
                if system.controllable()[i] {
                    *ui = boost;
                }
            }
        }
        Dynamics::Counting => {}
    }
    u
}

/// Runs the greedy rule. `reference[k]` is the reference run's
/// instantaneous cost at the start of bin `k`. Multipliers are clamped to
/// `cfg.bounds`.
pub fn greedy_controller(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    greedy: &GreedyConfig,
    reference: &[f64],
    stream: &SeedStream,
) -> Result<ControlRun> {
    cfg.validate()?;
    greedy.validate()?;
    if reference.len() != cfg.bins {
        return Err(Error::invalid(format!(
            "greedy reference has {} entries, expected one per bin ({})",
            reference.len(),
            cfg.bins
        )));
    }
    let observe = observation_bins(cfg.bins, greedy.observations);
    let m = system.process().dims();
    let mut active = false;
    execute_bins(system, cost, x0, cfg, ControlMode::Multiplicative, stream, |ctx| {
        if observe.binary_search(&ctx.bin).is_ok() {
            active = cost.instantaneous(&ctx.state.x) > greedy.threshold * reference[ctx.bin];
        }
        if !active || ctx.spent >= greedy.budget {
            return Ok(BinDecision::identity(m));
        }
        let multipliers = greedy_direction(system, cost, &ctx.state.x, greedy.boost)
            .into_iter()
            .map(|u| cfg.bounds.apply(u))
            .collect();
        Ok(BinDecision {
            multipliers,
            ess: f64::NAN,
        })
    })
}
