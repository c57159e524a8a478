use crate::cost::CostSpec;
use crate::error::Result;
use crate::mpc::{estimate_from, run_fixed_policy, ControlConfig, ControlMode, ControlRun};
use crate::policy::PiecewiseConstantPolicy;
use crate::rng::{tag, SeedStream};
use crate::sde::{StartState, System};

/// Scales only the base rates, once: a single multiplier per dimension
/// estimated at `t0` from uncontrolled samples over the whole horizon
/// (stream `child(SAMPLE, 0)`), held for every bin. Excitation is left
/// unscaled.
pub fn base_intensity(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    stream: &SeedStream,
) -> Result<ControlRun> {
    cfg.validate()?;
    let t0 = x0.time();
    let end = t0 + cfg.horizon;
    let (one_bin, ess) = estimate_from(system, cost, x0, end, &[t0, end], cfg, &stream.child(tag::SAMPLE, 0))?;
    let m = system.process().dims();
    let values = one_bin.row(0).repeat(cfg.bins);
    let policy = PiecewiseConstantPolicy::new(cfg.edges(t0), m, values)?;
    run_fixed_policy(system, cost, x0, cfg, &policy, ControlMode::BaseRate, ess, stream)
}
