//! Policy search against Monte Carlo rollouts of the controlled system.
//! Parameters are log multipliers of the controllable dimensions, one
//! vector per constant-control segment.

use crate::cost::{control_cost, CostSpec};
use crate::error::{Error, Result};
use crate::mpc::{execute_bins, run_fixed_policy, BinDecision, ControlConfig, ControlMode, ControlRun};
use crate::numeric::compensated_sum;
use crate::point_process::IntensityControl;
use crate::policy::{uniform_edges, PiecewiseConstantPolicy};
use crate::rng::{tag, SeedStream};
use crate::sde::{ordered_map, sample_stream, simulate_rollout, StartState, System};

use super::search::{cross_entropy, finite_difference, BatchObjective, FiniteDifferenceConfig, SearchResult};
use super::BaselineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchMethod {
    CrossEntropy,
    FiniteDifference,
}

/// Mean of `S + gamma C` over `rollouts` controlled paths from `start`.
/// A candidate whose rollout hits the event cap costs infinity.
/// Rollout `r` of every candidate uses the same stream (common random numbers).
pub struct RolloutObjective<'a> {
    system: &'a System,
    cost: &'a CostSpec,
    start: &'a StartState,
    edges: Vec<f64>,
    euler_step: f64,
    rollouts: usize,
    stream: SeedStream,
    cfg: &'a ControlConfig,
    free_dims: Vec<usize>,
}

impl<'a> RolloutObjective<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: &'a System,
        cost: &'a CostSpec,
        start: &'a StartState,
        edges: Vec<f64>,
        cfg: &'a ControlConfig,
        rollouts: usize,
        stream: SeedStream,
    ) -> Result<Self> {
        if rollouts == 0 {
            return Err(Error::invalid("rollouts per candidate must be >= 1"));
        }
        if edges.len() < 2 || (edges[0] - start.time()).abs() > 1e-9 {
            return Err(Error::invalid("search segments must start at the current state's time"));
        }
        cost.check_dims(system.state_dims())?;
        let free_dims = (0..system.process().dims())
            .filter(|&i| system.controllable()[i])
            .collect();
        Ok(Self {
            system,
            cost,
            start,
            edges,
            euler_step: cfg.euler_step,
            rollouts,
            stream,
            cfg,
            free_dims,
        })
    }

    /// Maps log multipliers to a clamped policy; fixed dimensions stay at 1.
    pub fn policy(&self, params: &[f64]) -> Result<PiecewiseConstantPolicy> {
        let m = self.system.process().dims();
        let segs = self.edges.len() - 1;
        if params.len() != segs * self.free_dims.len() {
            return Err(Error::invalid("parameter vector has the wrong length"));
        }
        let mut values = vec![1.0; segs * m];
        for s in 0..segs {
            for (j, &d) in self.free_dims.iter().enumerate() {
                values[s * m + d] = self.cfg.bounds.apply(params[s * self.free_dims.len() + j].exp());
            }
        }
        PiecewiseConstantPolicy::new(self.edges.clone(), m, values)
    }
}

impl BatchObjective for RolloutObjective<'_> {
    fn dims(&self) -> usize {
        (self.edges.len() - 1) * self.free_dims.len()
    }

    fn evaluate(&self, candidates: &[Vec<f64>]) -> Result<Vec<f64>> {
        let policies = candidates.iter().map(|c| self.policy(c)).collect::<Result<Vec<_>>>()?;
        let end = *self.edges.last().expect("two edges");
        let gamma = self.cost.gamma();
        let model = self.system.process();
        let values = ordered_map(policies.len() * self.rollouts, |n| {
            let (c, r) = (n / self.rollouts, n % self.rollouts);
            let policy = &policies[c];
            let ro = match simulate_rollout(
                self.system,
                self.start,
                end,
                self.euler_step,
                IntensityControl::Multiplicative(policy),
                &sample_stream(&self.stream, r),
                self.cost,
            ) {
                Err(e) if e.is_event_limit() => return Ok(f64::INFINITY),
                other => other?,
            };
            Ok(ro.cost + gamma * control_cost(policy, model, &self.start.process, &ro.events)?)
        })?;
        Ok(values
            .chunks(self.rollouts)
            .map(|v| compensated_sum(v.iter().copied()) / self.rollouts as f64)
            .collect())
    }
}

#[allow(clippy::too_many_arguments)]
/// Optimizes a policy on `edges` (starting at `start`) with the chosen
/// search. Rollouts per candidate are set so that one search uses about
/// `cfg.samples` rollouts in total.
pub fn search_policy(
    system: &System,
    cost: &CostSpec,
    start: &StartState,
    edges: Vec<f64>,
    cfg: &ControlConfig,
    method: SearchMethod,
    baseline: &BaselineConfig,
    stream: &SeedStream,
) -> Result<(PiecewiseConstantPolicy, SearchResult)> {
    let free = system.controllable().iter().filter(|&&c| c).count();
    let params = (edges.len() - 1) * free;
    let candidates_total = match method {
        SearchMethod::CrossEntropy => baseline.cross_entropy.population * baseline.cross_entropy.max_iterations,
        SearchMethod::FiniteDifference => {
            baseline.finite_difference.iterations * (perturbation_count(baseline, params) + 1)
        }
    };
    let rollouts = (cfg.samples / candidates_total.max(1)).max(1);
    let objective = RolloutObjective::new(system, cost, start, edges, cfg, rollouts, stream.sub(tag::ROLLOUT))?;
    let result = match method {
        SearchMethod::CrossEntropy => cross_entropy(&objective, &baseline.cross_entropy, stream)?,
        SearchMethod::FiniteDifference => {
            let fd = FiniteDifferenceConfig {
                perturbations: perturbation_count(baseline, params),
                ..baseline.finite_difference.clone()
            };
            finite_difference(&objective, &vec![0.0; params], &fd, stream)?
        }
    };
    Ok((objective.policy(&result.params)?, result))
}

/// At least one perturbation more than there are parameters.
fn perturbation_count(baseline: &BaselineConfig, params: usize) -> usize {
    baseline.finite_difference.perturbations.max(params + 1)
}

/// Receding-horizon policy search: at bin `k` a constant multiplier vector
/// is optimized over the same window KL-MPC samples on (clipped at `T`),
/// using `stream.child(SAMPLE, k)`, and executed for one bin.
pub fn run_search_mpc(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    method: SearchMethod,
    baseline: &BaselineConfig,
    stream: &SeedStream,
) -> Result<ControlRun> {
    cfg.validate()?;
    baseline.validate()?;
    let ahead = cfg.lookahead_bins()?;
    execute_bins(system, cost, x0, cfg, ControlMode::Multiplicative, stream, |ctx| {
        let k = ctx.bin;
        let window = vec![ctx.edges[k], ctx.edges[(k + ahead).min(cfg.bins)]];
        let (policy, _) = search_policy(
            system,
            cost,
            ctx.state,
            window,
            cfg,
            method,
            baseline,
            &stream.child(tag::SAMPLE, k as u64),
        )?;
        Ok(BinDecision {
            multipliers: policy.row(0).to_vec(),
            ess: f64::NAN,
        })
    })
}

/// Open-loop policy search over `[t0, T]` with `openloop_segments` constant
/// segments (at most `K`), expanded to the `K` execution bins.
pub fn run_search_openloop(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    method: SearchMethod,
    baseline: &BaselineConfig,
    stream: &SeedStream,
) -> Result<ControlRun> {
    cfg.validate()?;
    baseline.validate()?;
    let segs = baseline.openloop_segments.min(cfg.bins);
    let t0 = x0.time();
    let seg_edges = uniform_edges(t0, t0 + cfg.horizon, segs)?;
    let (coarse, _) = search_policy(
        system,
        cost,
        x0,
        seg_edges,
        cfg,
        method,
        baseline,
        &stream.child(tag::SAMPLE, 0),
    )?;
    let edges = cfg.edges(t0);
    let m = system.process().dims();
    let mut values = Vec::with_capacity(cfg.bins * m);
    for k in 0..cfg.bins {
        let s = (k * segs) / cfg.bins;
        values.extend_from_slice(coarse.row(s));
    }
    let policy = PiecewiseConstantPolicy::new(edges, m, values)?;
    run_fixed_policy(
        system,
        cost,
        x0,
        cfg,
        &policy,
        ControlMode::Multiplicative,
        f64::NAN,
        stream,
    )
}
