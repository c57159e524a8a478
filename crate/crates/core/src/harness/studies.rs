//! The opinion-guiding and broadcasting studies and the held-out ranking
//! evaluation.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::baselines::{
    base_intensity, greedy_controller, run_search_mpc, run_search_openloop, GreedyConfig, SearchMethod,
};
use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::mpc::{run_mpc, run_openloop, run_uncontrolled, ControlRun};
use crate::numeric::mean_std;
use crate::point_process::{fit_hawkes1d, fit_poisson, EventSequence, IntensityControl, ProcessState, SearchConfig};
use crate::rng::{tag, SeedStream};
use crate::sde::{simulate_trajectory, BroadcastModel, OpinionModel, StartState, System, Trajectory};

use super::config::{BroadcastParams, ExperimentConfig, Method, Task};
use super::network::gen_network;
use super::report::{pairwise_concordance, ExperimentReport, RunRecord};

/// A system with its cost and starting state, built from a configuration and seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: System,
    pub cost: CostSpec,
    pub start: StartState,
}

/// Builds the opinion or broadcast scenario of `cfg` for `seed`. The opinion
/// network comes from `child(NETWORK, 0)` and baseline opinions from
/// `child(NETWORK, 1)`; the same matrix drives opinion jumps and excitation.
pub fn scenario(cfg: &ExperimentConfig, seed: u64) -> Result<Scenario> {
    let stream = SeedStream::new(seed);
    match cfg.task {
        Task::Opinion => {
            let p = &cfg.opinion;
            let a = gen_network(
                p.users,
                p.density,
                p.weight_low,
                p.weight_high,
                &stream.child(tag::NETWORK, 0),
            )?;
            let mut rng = stream.child(tag::NETWORK, 1).rng();
            let baseline: Vec<f64> = (0..p.users)
                .map(|_| {
                    if p.baseline_high > p.baseline_low {
                        rng.random_range(p.baseline_low..p.baseline_high)
                    } else {
                        p.baseline_low
                    }
                })
                .collect();
            let process = crate::point_process::HawkesModel::new(vec![p.base_rate; p.users], a.clone(), p.decay)?;
            if !process.is_stationary() {
                log::warn!(
                    "opinion network has branching ratio {:.3} >= 1",
                    process.branching_ratio()
                );
            }
            let system = System::opinion(OpinionModel::new(baseline, p.beta, a)?, process)?;
            let cost = CostSpec::least_squares(vec![p.target; p.users], cfg.gamma)?;
            let start = system.initial_state(p.initial_opinion, 0.0);
            Ok(Scenario { system, cost, start })
        }
        Task::Broadcast | Task::Heldout => {
            let system = System::broadcast(broadcast_model(&cfg.broadcast)?)?;
            let cost = CostSpec::broadcast_rank(cfg.gamma)?;
            let start = system.initial_state(0.0, 0.0);
            Ok(Scenario { system, cost, start })
        }
    }
}

fn broadcast_model(p: &BroadcastParams) -> Result<BroadcastModel> {
    BroadcastModel::uniform(
        p.followers,
        p.broadcaster_rate,
        p.competitor_rate,
        p.competitor_excitation,
        p.decay,
    )?
    .with_initial_rank(p.initial_rank)
}

/// Time average over `[a, b]` of the mean state coordinate, treating the
/// state as constant between recorded points.
pub fn time_average(traj: &Trajectory, a: f64, b: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::invalid("time average needs a nonempty window"));
    }
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let mut current = mean(
        traj.state_at(a)
            .ok_or_else(|| Error::invalid("window starts before the path"))?,
    );
    let mut t = a;
    let mut acc = 0.0;
    let times = traj.times();
    let first = times.partition_point(|&s| s <= a);
    for (p, &s) in times.iter().enumerate().skip(first) {
        if s >= b {
            break;
        }
        acc += current * (s - t);
        t = s;
        current = mean(traj.state(p));
    }
    acc += current * (b - t);
    Ok(acc / (b - a))
}

/// Runs one control method from `start`. `reference` is the KL-MPC run with
/// the same seed; greedy needs it for its threshold and default budget.
pub fn run_control_method(
    method: Method,
    sc: &Scenario,
    start: &StartState,
    cfg: &ExperimentConfig,
    greedy: &GreedyConfig,
    reference: Option<&ControlRun>,
    stream: &SeedStream,
) -> Result<ControlRun> {
    let (sys, cost, c) = (&sc.system, &sc.cost, &cfg.control);
    let bl = &cfg.baseline;
    match method {
        Method::Uncontrolled => run_uncontrolled(sys, cost, start, c, stream),
        Method::KlMpc => run_mpc(sys, cost, start, c, stream),
        Method::KlOpenLoop => run_openloop(sys, cost, start, c, stream),
        Method::CeMpc => run_search_mpc(sys, cost, start, c, SearchMethod::CrossEntropy, bl, stream),
        Method::FdMpc => run_search_mpc(sys, cost, start, c, SearchMethod::FiniteDifference, bl, stream),
        Method::CeOpenLoop => run_search_openloop(sys, cost, start, c, SearchMethod::CrossEntropy, bl, stream),
        Method::FdOpenLoop => run_search_openloop(sys, cost, start, c, SearchMethod::FiniteDifference, bl, stream),
        Method::BaseIntensity => base_intensity(sys, cost, start, c, stream),
        Method::Greedy => {
            let reference = reference.ok_or_else(|| Error::invalid("greedy needs a reference KL-MPC run"))?;
            let series: Vec<f64> = reference.diagnostics.iter().map(|d| d.instantaneous_cost).collect();
            let mut g = greedy.clone();
            if !g.budget.is_finite() {
                g.budget = reference.control_cost;
            }
            greedy_controller(sys, cost, start, c, &g, &series, stream)
        }
        Method::Oracle | Method::Random => Err(Error::invalid(format!("{method} only applies to held-out evaluation"))),
    }
}

fn record_from_run(method: Method, seed: u64, task: Task, run: &ControlRun, seconds: f64) -> Result<RunRecord> {
    let average_rank = match task {
        Task::Broadcast => time_average(&run.trajectory, run.trajectory.start_time(), run.trajectory.end_time())?,
        _ => f64::NAN,
    };
    Ok(RunRecord {
        state_cost: run.state_cost,
        control_cost: run.control_cost,
        initial_cost: run.initial_cost,
        terminal_cost: run.terminal_cost,
        average_rank,
        series: run.diagnostics.iter().map(|d| (d.time, d.instantaneous_cost)).collect(),
        policy: Some(run.policy.clone()),
        wall_clock: seconds,
        ..RunRecord::empty(method, seed)
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed().as_secs_f64())
}

/// Per seed: every configured method from the same start with the same
/// execution stream. Greedy is tuned over the `(threshold, observations)`
/// grid; the grid point with the lowest mean state cost across seeds is reported.
pub fn run_control_study(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.task == Task::Heldout {
        return Err(Error::Config("use the held-out evaluation for task heldout".into()));
    }
    let want_greedy = cfg.methods.contains(&Method::Greedy);
    let direct: Vec<Method> = cfg
        .methods
        .iter()
        .copied()
        .filter(|&m| m != Method::Greedy && !(want_greedy && m == Method::KlMpc))
        .collect();

    struct SeedResult {
        records: Vec<RunRecord>,
        reference: Option<Result<ControlRun>>,
        reference_seconds: f64,
        greedy_costs: Vec<f64>,
    }

    let per_seed: Vec<Result<SeedResult>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sc = scenario(cfg, seed)?;
            let stream = SeedStream::new(seed);
            let (reference, reference_seconds) = if want_greedy {
                let (r, s) = timed(|| run_mpc(&sc.system, &sc.cost, &sc.start, &cfg.control, &stream));
                (Some(r), s)
            } else {
                (None, 0.0)
            };
            let records: Vec<RunRecord> = direct
                .par_iter()
                .map(|&m| {
                    let (r, s) =
                        timed(|| run_control_method(m, &sc, &sc.start, cfg, &cfg.baseline.greedy, None, &stream));
                    r.and_then(|run| record_from_run(m, seed, cfg.task, &run, s))
                        .unwrap_or_else(|e| RunRecord::failed(m, seed, &e))
                })
                .collect();
            let grid = greedy_grid(cfg);
            let greedy_costs = match reference.as_ref() {
                Some(Ok(kl)) => grid
                    .par_iter()
                    .map(|g| {
                        run_control_method(Method::Greedy, &sc, &sc.start, cfg, g, Some(kl), &stream)
                            .map(|r| r.state_cost)
                            .unwrap_or(f64::NAN)
                    })
                    .collect(),
                _ => vec![f64::NAN; grid.len()],
            };
            Ok(SeedResult {
                records,
                reference,
                reference_seconds,
                greedy_costs,
            })
        })
        .collect();

    let mut results = Vec::with_capacity(per_seed.len());
    for r in per_seed {
        results.push(r?);
    }
    let mut notes = Vec::new();
    let grid = greedy_grid(cfg);
    let chosen = want_greedy.then(|| {
        let means: Vec<f64> = (0..grid.len())
            .map(|g| {
                let v: Vec<f64> = results
                    .iter()
                    .map(|s| s.greedy_costs[g])
                    .filter(|c| c.is_finite())
                    .collect();
                if v.is_empty() {
                    f64::INFINITY
                } else {
                    mean_std(&v).0
                }
            })
            .collect();
        let best = (0..grid.len()).fold(0, |b, g| if means[g] < means[b] { g } else { b });
        notes.push(format!(
            "greedy grid point: threshold {} observations {} (mean state cost {:.6})",
            grid[best].threshold, grid[best].observations, means[best]
        ));
        grid[best].clone()
    });

    let mut records = Vec::new();
    for &m in &cfg.methods {
        for (s, &seed) in results.iter().zip(&cfg.seeds) {
            let rec = match m {
                Method::KlMpc if want_greedy => match s.reference.as_ref().expect("reference run") {
                    Ok(run) => record_from_run(m, seed, cfg.task, run, s.reference_seconds)?,
                    Err(e) => RunRecord::failed(m, seed, e),
                },
                Method::Greedy => {
                    let g = chosen.as_ref().expect("greedy grid point");
                    let (r, secs) = timed(|| {
                        let sc = scenario(cfg, seed)?;
                        let reference = match s.reference.as_ref().expect("reference run") {
                            Ok(run) => run,
                            Err(e) => return Err(Error::Estimation(format!("reference run failed: {e}"))),
                        };
                        run_control_method(m, &sc, &sc.start, cfg, g, Some(reference), &SeedStream::new(seed))
                    });
                    r.and_then(|run| record_from_run(m, seed, cfg.task, &run, secs))
                        .unwrap_or_else(|e| RunRecord::failed(m, seed, &e))
                }
                _ => s
                    .records
                    .iter()
                    .find(|r| r.method == m)
                    .cloned()
                    .expect("record for every direct method"),
            };
            records.push(rec);
        }
    }
    let mut report = ExperimentReport {
        task: cfg.task,
        records,
        notes,
    };
    let ratio = report
        .stats(Method::CeMpc, |r| r.state_cost)
        .zip(report.stats(Method::KlMpc, |r| r.state_cost));
    if let Some(((ce, _), (kl, _))) = ratio {
        report
            .notes
            .push(format!("mean state cost ratio ce-mpc / kl-mpc: {:.6}", ce / kl));
    }
    Ok(report)
}

fn greedy_grid(cfg: &ExperimentConfig) -> Vec<GreedyConfig> {
    let mut grid = Vec::new();
    for &threshold in &cfg.greedy_thresholds {
        for &observations in &cfg.greedy_observations {
            if observations <= cfg.control.bins {
                grid.push(GreedyConfig {
                    threshold,
                    observations,
                    ..cfg.baseline.greedy.clone()
                });
            }
        }
    }
    if grid.is_empty() {
        grid.push(GreedyConfig {
            threshold: cfg.greedy_thresholds[0],
            observations: cfg.control.bins,
            ..cfg.baseline.greedy.clone()
        });
    }
    grid
}

/// One recorded interval of the synthetic history.
struct Interval {
    start: f64,
    end: f64,
    x: Vec<f64>,
    actual: f64,
}

/// Fits the broadcast model on `events` restricted to one interval: Poisson
/// for the broadcaster, one-dimensional Hawkes per competitor feed, then a
/// refit of every feed with the median of their decays as the shared decay.
pub fn fit_broadcast(events: &EventSequence, start: f64, end: f64, followers: usize) -> Result<BroadcastModel> {
    let window: Vec<Vec<f64>> = (0..=followers)
        .map(|d| events.times(d).filter(|&t| t >= start && t < end).collect())
        .collect();
    let broadcaster = fit_poisson(&EventSequence::from_times(&window[followers..], start, end)?)?;
    let feed = |d: usize, cfg: SearchConfig| fit_hawkes1d(&EventSequence::from_times(&window[d..=d], start, end)?, cfg);
    let mut omegas = Vec::with_capacity(followers);
    for d in 0..followers {
        omegas.push(feed(d, SearchConfig::default())?.model.omega());
    }
    omegas.sort_by(f64::total_cmp);
    let omega = if followers % 2 == 1 {
        omegas[followers / 2]
    } else {
        0.5 * (omegas[followers / 2 - 1] + omegas[followers / 2])
    };
    let shared = SearchConfig {
        fixed_omega: Some(omega),
        ..SearchConfig::default()
    };
    let mut mu = Vec::with_capacity(followers);
    let mut alpha = Vec::with_capacity(followers);
    for d in 0..followers {
        let m = feed(d, shared)?.model;
        mu.push(m.mu()[0]);
        alpha.push(m.alpha(0, 0));
    }
    BroadcastModel::new(broadcaster.model.mu()[0], mu, alpha, omega)
}

/// Held-out ranking evaluation. Per seed a synthetic history of
/// `intervals` windows of length `horizon` is drawn from the configured
/// model (stream `child(DATA, 0)`). Each interval in turn is used for
/// fitting; every other interval gets a predicted best position `x*` (the
/// expected time-averaged rank of the method's controlled runs from the
/// interval's actual starting state), and the intervals are ordered by
/// `|x - x*|` and by the actual average rank `x`. The score is the
/// pairwise concordance of the two orderings, averaged over rotations.
pub fn run_heldout_eval(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.task != Task::Heldout {
        return Err(Error::Config("held-out evaluation needs task = heldout".into()));
    }
    let n = cfg.heldout.intervals;
    let length = cfg.control.horizon;
    let followers = cfg.broadcast.followers;
    let cells: Vec<(u64, Method)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.methods.iter().map(move |&m| (s, m)))
        .collect();

    let histories: Vec<Result<(Vec<Interval>, EventSequence)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sc = scenario(cfg, seed)?;
            let data = simulate_trajectory(
                &sc.system,
                &sc.start,
                n as f64 * length,
                cfg.control.euler_step,
                IntensityControl::None,
                &SeedStream::new(seed).child(tag::DATA, 0),
            )?;
            let intervals = (0..n)
                .map(|i| {
                    let (a, b) = (i as f64 * length, (i + 1) as f64 * length);
                    Ok(Interval {
                        start: a,
                        end: b,
                        x: data.state_at(a).expect("inside the path").to_vec(),
                        actual: time_average(&data, a, b)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((intervals, data.events().clone()))
        })
        .collect();

    let records: Vec<RunRecord> = cells
        .par_iter()
        .map(|&(seed, method)| {
            let idx = cfg.seeds.iter().position(|&s| s == seed).expect("seed in list");
            let (r, secs) = timed(|| {
                let (intervals, events) = histories[idx].as_ref().map_err(|e| Error::Simulation {
                    time: 0.0,
                    reason: format!("synthetic history failed: {e}"),
                })?;
                heldout_accuracy(cfg, seed, method, intervals, events, followers)
            });
            match r {
                Ok((accuracy, mean_position)) => RunRecord {
                    accuracy,
                    average_rank: mean_position,
                    wall_clock: secs,
                    ..RunRecord::empty(method, seed)
                },
                Err(e) => RunRecord::failed(method, seed, &e),
            }
        })
        .collect();
    let mut ordered = Vec::with_capacity(records.len());
    for &m in &cfg.methods {
        ordered.extend(records.iter().filter(|r| r.method == m).cloned());
    }
    Ok(ExperimentReport {
        task: cfg.task,
        records: ordered,
        notes: vec![format!(
            "held-out: {n} intervals of length {length}; average_rank column holds the mean predicted position"
        )],
    })
}

/// `(mean accuracy over rotations, mean predicted position)`.
fn heldout_accuracy(
    cfg: &ExperimentConfig,
    seed: u64,
    method: Method,
    intervals: &[Interval],
    events: &EventSequence,
    followers: usize,
) -> Result<(f64, f64)> {
    let n = intervals.len();
    let master = SeedStream::new(seed);
    let mut accuracies = Vec::with_capacity(n);
    let mut positions = Vec::new();
    let needs_model = !matches!(method, Method::Oracle | Method::Random);
    for r in 0..n {
        let sc = if needs_model {
            let system = System::broadcast(fit_broadcast(events, intervals[r].start, intervals[r].end, followers)?)?;
            Some(Scenario {
                cost: CostSpec::broadcast_rank(cfg.gamma)?,
                start: system.initial_state(0.0, 0.0),
                system,
            })
        } else {
            None
        };
        let mut predicted = Vec::with_capacity(n - 1);
        let mut actual = Vec::with_capacity(n - 1);
        for (i, iv) in intervals.iter().enumerate() {
            if i == r {
                continue;
            }
            let stream = master.child(tag::BASELINE, (r * n + i) as u64);
            let x_star = match method {
                Method::Oracle => 1.0,
                Method::Random => {
                    let mut rng = stream.child(tag::RANDOM_METHOD, 0).rng();
                    rng.random_range(1.0..=1.0 + followers as f64)
                }
                _ => {
                    let sc = sc.as_ref().expect("fitted model");
                    let start = StartState {
                        x: iv.x.clone(),
                        process: ProcessState::from_history(sc.system.process(), events, iv.start),
                    };
                    let mut ranks = Vec::with_capacity(cfg.heldout.runs);
                    for run in 0..cfg.heldout.runs {
                        let out = run_control_method(
                            method,
                            sc,
                            &start,
                            cfg,
                            &cfg.baseline.greedy,
                            None,
                            &stream.child(tag::ROLLOUT, run as u64),
                        )?;
                        ranks.push(time_average(&out.trajectory, iv.start, iv.end)?);
                    }
                    mean_std(&ranks).0
                }
            };
            positions.push(x_star);
            predicted.push((iv.actual - x_star).abs());
            actual.push(iv.actual);
        }
        accuracies.push(pairwise_concordance(&predicted, &actual)?);
    }
    Ok((mean_std(&accuracies).0, mean_std(&positions).0))
}
