use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::point_process::{sample_thinning_from, EventSequence, IntensityControl};
use crate::rng::{tag, SeedStream};

use super::trajectory::{PointKind, Trajectory, TrajectoryRecorder};
use super::{StartState, System};

/// Receives the recorded points of a path as it is integrated.
///
/// Points arrive in time order; `increment` delivers the Wiener increments
/// of the interval ending at the next point (diffusive dynamics only).
pub trait PathSink {
    fn point(&mut self, time: f64, x: &[f64], kind: PointKind);

    fn increment(&mut self, _dw: &[f64]) {}
}

/// Grid `t0 + k dt` for `k = 0..n`, with the last point moved to exactly `end`.
pub fn euler_grid(t0: f64, end: f64, dt: f64) -> Vec<f64> {
    let n = ((end - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * dt).collect();
    grid.push(end);
    grid
}

/// Integrates `system` from `start` to `end`, feeding every recorded point to `sink`.
///
/// Events are drawn first from `stream.sub(EVENTS)` (the point process does
/// not depend on the state); the Euler steps are then split at every event
/// time and the jump is applied with the pre-jump state. Gaussian draws come
/// from `stream.sub(NOISE)`, with variance equal to the substep length.
pub fn simulate_path<S: PathSink>(
    system: &System,
    start: &StartState,
    end: f64,
    dt: f64,
    control: IntensityControl<'_>,
    stream: &SeedStream,
    sink: &mut S,
) -> Result<EventSequence> {
    let t0 = start.time();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("Euler step {dt} must be > 0")));
    }
    if !(end.is_finite() && end >= t0) {
        return Err(Error::invalid(format!("bad simulation window [{t0}, {end}]")));
    }
    let d = system.state_dims();
    if start.x.len() != d {
        return Err(Error::invalid(format!(
            "initial state has {} entries, expected {d}",
            start.x.len()
        )));
    }
    if start.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }
    let events = sample_thinning_from(system.process(), &start.process, end, &stream.sub(tag::EVENTS), control)?;
    let noisy = system.has_noise();
    let mut rng = stream.sub(tag::NOISE).rng();
    let mut x = start.x.clone();
    let mut z = vec![0.0; if noisy { d } else { 0 }];
    let mut dw = vec![0.0; z.len()];
    let mut t = t0;

    let mut step = |x: &mut [f64], t: &mut f64, to: f64, sink: &mut S| {
        let h = to - *t;
        if noisy {
            if h > 0.0 {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                system.euler_step(x, h, &z, &mut dw);
            } else {
                dw.fill(0.0);
            }
            sink.increment(&dw);
        } else if h > 0.0 {
            system.euler_step(x, h, &z, &mut dw);
        }
        *t = to;
    };
    let check = |x: &[f64], t: f64| -> Result<()> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Simulation {
                time: t,
                reason: "state became non-finite".into(),
            })
        }
    };

    sink.point(t0, &x, PointKind::Grid);
    let evs = events.events();
    let mut next = 0;
    let grid = euler_grid(t0, end, dt);
    for &g in &grid[1..] {
        while next < evs.len() && evs[next].time <= g {
            let e = evs[next];
            step(&mut x, &mut t, e.time, sink);
            system.apply_jump(&mut x, e.dim);
            check(&x, e.time)?;
            sink.point(e.time, &x, PointKind::Event);
            next += 1;
        }
        step(&mut x, &mut t, g, sink);
        check(&x, g)?;
        sink.point(g, &x, PointKind::Grid);
    }
    Ok(events)
}

pub fn simulate_trajectory(
    system: &System,
    start: &StartState,
    end: f64,
    dt: f64,
    control: IntensityControl<'_>,
    stream: &SeedStream,
) -> Result<Trajectory> {
    let mut rec = TrajectoryRecorder::new(system.state_dims());
    let events = simulate_path(system, start, end, dt, control, stream, &mut rec)?;
    Ok(rec.finish(events, start.process.clone()))
}

/// A sampled path reduced to what the estimators need.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub events: EventSequence,
    pub cost: f64,
}

/// Samples one path and evaluates its state cost on the fly, without storing states.
pub fn simulate_rollout(
    system: &System,
    start: &StartState,
    end: f64,
    dt: f64,
    control: IntensityControl<'_>,
    stream: &SeedStream,
    cost: &CostSpec,
) -> Result<Rollout> {
    let mut acc = cost.accumulator();
    let events = simulate_path(system, start, end, dt, control, stream, &mut acc)?;
    Ok(Rollout {
        events,
        cost: acc.total(),
    })
}

/// Stream of sample `m` within a batch.
pub fn sample_stream(batch: &SeedStream, m: usize) -> SeedStream {
    batch.child(tag::ROLLOUT, m as u64)
}

/// Runs `f` for `0..count` in parallel and returns the results in index
/// order; the first failing index (by index, not by time) is reported.
pub(crate) fn ordered_map<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let results: Vec<Result<T>> = (0..count).into_par_iter().map(&f).collect();
    let mut out = Vec::with_capacity(count);
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(Error::Sample {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// `samples` independent uncontrolled trajectories; sample `m` uses
/// [`sample_stream`]`(stream, m)`, so the output does not depend on scheduling.
pub fn batch_sample(
    system: &System,
    start: &StartState,
    end: f64,
    dt: f64,
    samples: usize,
    stream: &SeedStream,
) -> Result<Vec<Trajectory>> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    ordered_map(samples, |m| {
        simulate_trajectory(
            system,
            start,
            end,
            dt,
            IntensityControl::None,
            &sample_stream(stream, m),
        )
    })
}

/// As [`batch_sample`] but keeps only events and state cost of each path.
#[allow(clippy::too_many_arguments)]
pub fn batch_rollouts(
    system: &System,
    start: &StartState,
    end: f64,
    dt: f64,
    samples: usize,
    stream: &SeedStream,
    cost: &CostSpec,
    control: IntensityControl<'_>,
) -> Result<Vec<Rollout>> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    cost.check_dims(system.state_dims())?;
    ordered_map(samples, |m| {
        simulate_rollout(system, start, end, dt, control, &sample_stream(stream, m), cost)
    })
}
