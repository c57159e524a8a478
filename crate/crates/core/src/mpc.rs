//! Receding-horizon control: sample from the realized state, estimate the
//! next bin's multipliers, execute one bin, repeat. Also the open-loop
//! variant and a generic bin-by-bin executor shared with the baselines.

use std::io::Write;
use std::path::Path;

use crate::cost::{control_cost, kl_rate_cost, CostSpec};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::point_process::IntensityControl;
use crate::policy::{uniform_edges, ClampBounds, PiecewiseConstantPolicy};
use crate::rng::{tag, SeedStream};
use crate::sde::{batch_rollouts, simulate_trajectory, StartState, System, Trajectory};
use crate::variational::{estimate_policy, EstimatorConfig, WeightedSampleBatch};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConfig {
    /// Control window length `T`, starting at the initial state's time.
    pub horizon: f64,
    /// Number of equal-width bins `K`.
    pub bins: usize,
    /// Sampling window `T~` of each MPC step; a whole number of bins.
    pub lookahead: f64,
    /// Samples `I` drawn per estimate.
    pub samples: usize,
    pub euler_step: f64,
    pub bounds: ClampBounds,
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid(format!("horizon T = {} must be > 0", self.horizon)));
        }
        if self.bins == 0 {
            return Err(Error::invalid("bins K must be >= 1"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("samples I must be >= 1"));
        }
        if !(self.euler_step.is_finite() && self.euler_step > 0.0) {
            return Err(Error::invalid(format!("Euler step {} must be > 0", self.euler_step)));
        }
        self.bounds.validate()?;
        self.lookahead_bins().map(|_| ())
    }

    pub fn bin_width(&self) -> f64 {
        self.horizon / self.bins as f64
    }

    /// `T~` in bins.
    pub fn lookahead_bins(&self) -> Result<usize> {
        let r = self.lookahead / self.bin_width();
        let n = r.round();
        if !(n >= 1.0 && (r - n).abs() < 1e-6 && self.lookahead <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::invalid(format!(
                "lookahead {} must be a whole number of bins of width {} and at most T = {}",
                self.lookahead,
                self.bin_width(),
                self.horizon
            )));
        }
        Ok(n as usize)
    }

    pub fn edges(&self, start: f64) -> Vec<f64> {
        uniform_edges(start, start + self.horizon, self.bins).expect("validated horizon and bins")
    }
}

/// How a bin's multipliers act on the intensity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    /// `lambda~ = u lambda`.
    Multiplicative,
    /// `lambda~ = u mu + (lambda - mu)`.
    BaseRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinDiagnostics {
    pub bin: usize,
    pub time: f64,
    /// Instantaneous cost of the realized state at the bin start.
    pub instantaneous_cost: f64,
    /// Effective sample size of the estimate; NaN for methods that draw no weighted samples.
    pub ess: f64,
    /// Mean multiplier over controllable dimensions.
    pub mean_multiplier: f64,
    /// Pathwise control cost incurred in this bin.
    pub control_cost: f64,
}

/// A completed controlled run over `[t0, t0 + T]`.
#[derive(Debug, Clone)]
pub struct ControlRun {
    pub policy: PiecewiseConstantPolicy,
    pub mode: ControlMode,
    pub trajectory: Trajectory,
    pub diagnostics: Vec<BinDiagnostics>,
    pub state_cost: f64,
    pub control_cost: f64,
    pub initial_cost: f64,
    pub terminal_cost: f64,
}

impl ControlRun {
    /// CSV rows `bin,time,instantaneous_cost,ess,mean_multiplier,control_cost`.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "bin",
            "time",
            "instantaneous_cost",
            "ess",
            "mean_multiplier",
            "control_cost",
        ])?;
        for d in &self.diagnostics {
            w.write_record([
                d.bin.to_string(),
                d.time.to_string(),
                d.instantaneous_cost.to_string(),
                d.ess.to_string(),
                d.mean_multiplier.to_string(),
                d.control_cost.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Writes `run_summary.csv`, `policy.csv` and `trajectory.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("run_summary.csv");
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.write_summary_csv(std::io::BufWriter::new(f))?;
        self.policy.save_csv(&dir.join("policy.csv"))?;
        self.trajectory.save_csv(&dir.join("trajectory.csv"))
    }
}

/// What the executor tells a controller before bin `bin`.
#[derive(Debug)]
pub struct BinContext<'a> {
    pub bin: usize,
    pub state: &'a StartState,
    pub edges: &'a [f64],
    /// Control cost spent in earlier bins.
    pub spent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinDecision {
    pub multipliers: Vec<f64>,
    pub ess: f64,
}

impl BinDecision {
    pub fn identity(dims: usize) -> Self {
        Self {
            multipliers: vec![1.0; dims],
            ess: f64::NAN,
        }
    }
}

fn masked_mean(values: &[f64], mask: &[bool]) -> f64 {
    let (s, n) = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        1.0
    } else {
        s / n as f64
    }
}

/// Executes `cfg.bins` bins from `x0`, asking `decide` for each bin's
/// multipliers. Bin `k` is simulated with the stream `stream.child(EXECUTE, k)`,
/// so every method run from the same stream sees the same randomness for
/// the same control.
pub fn execute_bins<F>(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    mode: ControlMode,
    stream: &SeedStream,
    mut decide: F,
) -> Result<ControlRun>
where
    F: FnMut(&BinContext<'_>) -> Result<BinDecision>,
{
    cfg.validate()?;
    cost.check_dims(system.state_dims())?;
    let model = system.process();
    let m = model.dims();
    let edges = cfg.edges(x0.time());
    let mut state = x0.clone();
    let mut values = Vec::with_capacity(cfg.bins * m);
    let mut diagnostics: Vec<BinDiagnostics> = Vec::with_capacity(cfg.bins);
    let mut realized: Option<Trajectory> = None;
    let mut spent = CompensatedSum::new();

    for k in 0..cfg.bins {
        let mut step = |state: &StartState, spent: f64| -> Result<(BinDecision, Trajectory, f64)> {
            let ctx = BinContext {
                bin: k,
                state,
                edges: &edges,
                spent,
            };
            let decision = decide(&ctx)?;
            let row = &decision.multipliers;
            if row.len() != m || row.iter().any(|u| !(u.is_finite() && *u > 0.0)) {
                return Err(Error::invalid(format!(
                    "bin {k}: controller returned invalid multipliers"
                )));
            }
            let bin_policy = PiecewiseConstantPolicy::new(vec![edges[k], edges[k + 1]], m, row.clone())?;
            let control = match mode {
                ControlMode::Multiplicative => IntensityControl::Multiplicative(&bin_policy),
                ControlMode::BaseRate => IntensityControl::BaseRate(row),
            };
            let seg = simulate_trajectory(
                system,
                state,
                edges[k + 1],
                cfg.euler_step,
                control,
                &stream.child(tag::EXECUTE, k as u64),
            )?;
            let bin_cost = match mode {
                ControlMode::Multiplicative => control_cost(&bin_policy, model, &state.process, seg.events())?,
                ControlMode::BaseRate => kl_rate_cost(model, &state.process, seg.events(), control)?,
            };
            Ok((decision, seg, bin_cost))
        };
        let (decision, seg, bin_cost) = match step(&state, spent.value()) {
            Ok(v) => v,
            Err(e) => {
                return Err(Error::Aborted {
                    bin: k,
                    diagnostics,
                    source: Box::new(e),
                })
            }
        };
        diagnostics.push(BinDiagnostics {
            bin: k,
            time: edges[k],
            instantaneous_cost: cost.instantaneous(&state.x),
            ess: decision.ess,
            mean_multiplier: masked_mean(&decision.multipliers, system.controllable()),
            control_cost: bin_cost,
        });
        spent.add(bin_cost);
        values.extend_from_slice(&decision.multipliers);
        state = StartState {
            x: seg.final_state().to_vec(),
            process: seg.final_process(model),
        };
        match realized.as_mut() {
            Some(t) => t.append(&seg)?,
            None => realized = Some(seg),
        }
    }
    let trajectory = realized.expect("at least one bin");
    Ok(ControlRun {
        policy: PiecewiseConstantPolicy::new(edges, m, values)?,
        mode,
        state_cost: cost.state_cost(&trajectory)?,
        control_cost: spent.value(),
        initial_cost: cost.instantaneous(&x0.x),
        terminal_cost: cost.instantaneous(trajectory.final_state()),
        trajectory,
        diagnostics,
    })
}

fn estimator_config(system: &System, cfg: &ControlConfig) -> EstimatorConfig {
    EstimatorConfig {
        bounds: cfg.bounds,
        controllable: Some(system.controllable().to_vec()),
    }
}

/// Samples `cfg.samples` uncontrolled rollouts from `start` to `end` and
/// estimates multipliers on `edges`.
pub fn estimate_from(
    system: &System,
    cost: &CostSpec,
    start: &StartState,
    end: f64,
    edges: &[f64],
    cfg: &ControlConfig,
    stream: &SeedStream,
) -> Result<(PiecewiseConstantPolicy, f64)> {
    let rollouts = batch_rollouts(
        system,
        start,
        end,
        cfg.euler_step,
        cfg.samples,
        stream,
        cost,
        IntensityControl::None,
    )?;
    let batch = WeightedSampleBatch::from_rollouts(rollouts, start.process.clone(), cost.gamma())?;
    let est = estimate_policy(&batch, system.process(), edges, &estimator_config(system, cfg))?;
    Ok((est.policy, est.ess))
}

/// KL model-predictive control. At bin `k` the sampling window is
/// `[t_k, t_{k + T~/width}]`, clipped at `T`; samples use
/// `stream.child(SAMPLE, k)`.
pub fn run_mpc(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    stream: &SeedStream,
) -> Result<ControlRun> {
    cfg.validate()?;
    let ahead = cfg.lookahead_bins()?;
    execute_bins(system, cost, x0, cfg, ControlMode::Multiplicative, stream, |ctx| {
        let k = ctx.bin;
        let end = ctx.edges[(k + ahead).min(cfg.bins)];
        let (policy, ess) = estimate_from(
            system,
            cost,
            ctx.state,
            end,
            &ctx.edges[k..k + 2],
            cfg,
            &stream.child(tag::SAMPLE, k as u64),
        )?;
        Ok(BinDecision {
            multipliers: policy.row(0).to_vec(),
            ess,
        })
    })
}

/// All bins estimated once from samples over `[t0, T]` (stream
/// `child(SAMPLE, 0)`), then executed without feedback.
pub fn run_openloop(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    stream: &SeedStream,
) -> Result<ControlRun> {
    cfg.validate()?;
    let edges = cfg.edges(x0.time());
    let (policy, ess) = estimate_from(
        system,
        cost,
        x0,
        edges[cfg.bins],
        &edges,
        cfg,
        &stream.child(tag::SAMPLE, 0),
    )?;
    run_fixed_policy(system, cost, x0, cfg, &policy, ControlMode::Multiplicative, ess, stream)
}

/// Executes a precomputed `K x M` policy.
#[allow(clippy::too_many_arguments)]
pub fn run_fixed_policy(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    policy: &PiecewiseConstantPolicy,
    mode: ControlMode,
    ess: f64,
    stream: &SeedStream,
) -> Result<ControlRun> {
    if policy.bins() != cfg.bins || policy.dims() != system.process().dims() {
        return Err(Error::invalid("policy shape does not match the control configuration"));
    }
    execute_bins(system, cost, x0, cfg, mode, stream, |ctx| {
        Ok(BinDecision {
            multipliers: policy.row(ctx.bin).to_vec(),
            ess,
        })
    })
}

/// The reference run with `u = 1` in every bin.
pub fn run_uncontrolled(
    system: &System,
    cost: &CostSpec,
    x0: &StartState,
    cfg: &ControlConfig,
    stream: &SeedStream,
) -> Result<ControlRun> {
    let m = system.process().dims();
    execute_bins(system, cost, x0, cfg, ControlMode::Multiplicative, stream, |_| {
        Ok(BinDecision::identity(m))
    })
}
