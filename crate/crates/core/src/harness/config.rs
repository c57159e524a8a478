//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma
//! separated, and `seeds` also accepts a half-open range `a..b`.
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `task` | `opinion`, `broadcast` or `heldout` | required |
//! | `horizon` | control window `T` | required |
//! | `bins` | bins `K` | required |
//! | `samples` | samples `I` per estimate | required |
//! | `gamma` | cost trade-off | required |
//! | `seeds` | master seeds | required |
//! | `lookahead` | MPC sampling window | `horizon / 10`, rounded to whole bins (at least one) |
//! | `euler_step` | Euler step | `0.1` |
//! | `clamp_min`, `clamp_max` | multiplier bounds | `0.001`, `1000` |
//! | `methods` | methods to run | task dependent |
//! | `users` | opinion: users `M` | `100` |
//! | `initial_opinion`, `target` | opinion: `x(0)` and target `a` | `-10`, `1` |
//! | `beta` | opinion: diffusion | `0.2` |
//! | `baseline_low`, `baseline_high` | opinion: baseline opinion range | `-1`, `1` |
//! | `base_rate` | opinion: posting base rate | `0.1` |
//! | `density`, `weight_low`, `weight_high` | opinion: network | `0.1`, `0`, `0.1` |
//! | `decay` | kernel decay `omega` | `1` |
//! | `followers` | broadcast: followers | `10` |
//! | `broadcaster_rate` | broadcast: broadcaster base rate | `1` |
//! | `competitor_rate`, `competitor_excitation` | broadcast: feed Hawkes parameters | `1`, `0.5` |
//! | `initial_rank` | broadcast: starting rank | `1` |
//! | `intervals` | held-out: number of intervals | `10` |
//! | `heldout_runs` | held-out: controlled runs per expected rank | `10` |
//! | `ce_population`, `ce_elite_fraction`, `ce_init_std`, `ce_iterations`, `ce_tol` | cross entropy | `10`, `0.2`, `0.5`, `4`, `0` |
//! | `fd_perturbations`, `fd_sigma`, `fd_step`, `fd_max_step`, `fd_iterations` | finite differences | `16`, `0.1`, `0.1`, `1`, `2` |
//! | `openloop_segments` | open-loop search segments | `10` |
//! | `greedy_boost` | greedy multiplier | `2` |
//! | `greedy_thresholds`, `greedy_observations` | greedy grid | `1,2,3,4,5`, `1,10,50,100` |

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::{BaselineConfig, CrossEntropyConfig, FiniteDifferenceConfig, GreedyConfig};
use crate::error::{Error, Result};
use crate::mpc::ControlConfig;
use crate::policy::ClampBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Opinion,
    Broadcast,
    Heldout,
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opinion" => Ok(Task::Opinion),
            "broadcast" => Ok(Task::Broadcast),
            "heldout" => Ok(Task::Heldout),
            _ => Err(Error::Config(format!(
                "unknown task `{s}` (expected opinion, broadcast or heldout)"
            ))),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Opinion => "opinion",
            Task::Broadcast => "broadcast",
            Task::Heldout => "heldout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Uncontrolled,
    KlMpc,
    KlOpenLoop,
    CeMpc,
    FdMpc,
    CeOpenLoop,
    FdOpenLoop,
    Greedy,
    BaseIntensity,
    /// Held-out only: predicts the best attainable rank of 1.
    Oracle,
    /// Held-out only: uniformly random predictions.
    Random,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Uncontrolled,
        Method::KlMpc,
        Method::KlOpenLoop,
        Method::CeMpc,
        Method::FdMpc,
        Method::CeOpenLoop,
        Method::FdOpenLoop,
        Method::Greedy,
        Method::BaseIntensity,
        Method::Oracle,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Uncontrolled => "uncontrolled",
            Method::KlMpc => "kl-mpc",
            Method::KlOpenLoop => "kl-ol",
            Method::CeMpc => "ce-mpc",
            Method::FdMpc => "fd-mpc",
            Method::CeOpenLoop => "ce-ol",
            Method::FdOpenLoop => "fd-ol",
            Method::Greedy => "greedy",
            Method::BaseIntensity => "bi",
            Method::Oracle => "oracle",
            Method::Random => "random",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpinionParams {
    pub users: usize,
    pub initial_opinion: f64,
    pub target: f64,
    pub beta: f64,
    pub baseline_low: f64,
    pub baseline_high: f64,
    pub base_rate: f64,
    pub density: f64,
    pub weight_low: f64,
    pub weight_high: f64,
    pub decay: f64,
}

impl Default for OpinionParams {
    fn default() -> Self {
        Self {
            users: 100,
            initial_opinion: -10.0,
            target: 1.0,
            beta: 0.2,
            baseline_low: -1.0,
            baseline_high: 1.0,
            base_rate: 0.1,
            density: 0.1,
            weight_low: 0.0,
            weight_high: 0.1,
            decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastParams {
    pub followers: usize,
    pub broadcaster_rate: f64,
    pub competitor_rate: f64,
    pub competitor_excitation: f64,
    pub decay: f64,
    pub initial_rank: f64,
}

impl Default for BroadcastParams {
    fn default() -> Self {
        Self {
            followers: 10,
            broadcaster_rate: 1.0,
            competitor_rate: 1.0,
            competitor_excitation: 0.5,
            decay: 1.0,
            initial_rank: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldoutParams {
    pub intervals: usize,
    pub runs: usize,
}

impl Default for HeldoutParams {
    fn default() -> Self {
        Self {
            intervals: 10,
            runs: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub task: Task,
    pub control: ControlConfig,
    pub gamma: f64,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub opinion: OpinionParams,
    pub broadcast: BroadcastParams,
    pub heldout: HeldoutParams,
    pub baseline: BaselineConfig,
    pub greedy_thresholds: Vec<f64>,
    pub greedy_observations: Vec<usize>,
}

const REQUIRED: [&str; 6] = ["task", "horizon", "bins", "samples", "gamma", "seeds"];

const OPTIONAL: [&str; 40] = [
    "lookahead",
    "euler_step",
    "clamp_min",
    "clamp_max",
    "methods",
    "users",
    "initial_opinion",
    "target",
    "beta",
    "baseline_low",
    "baseline_high",
    "base_rate",
    "density",
    "weight_low",
    "weight_high",
    "decay",
    "followers",
    "broadcaster_rate",
    "competitor_rate",
    "competitor_excitation",
    "initial_rank",
    "intervals",
    "heldout_runs",
    "ce_population",
    "ce_elite_fraction",
    "ce_init_std",
    "ce_iterations",
    "ce_tol",
    "fd_perturbations",
    "fd_sigma",
    "fd_step",
    "fd_max_step",
    "fd_iterations",
    "openloop_segments",
    "greedy_boost",
    "greedy_budget",
    "greedy_thresholds",
    "greedy_observations",
    "ce_init_mean",
    "ce_min_std",
];

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let k = k.trim().to_string();
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
    }
    Ok(out)
}

struct Fields(BTreeMap<String, String>);

impl Fields {
    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self
            .0
            .get(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))?;
        v.parse()
            .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`")))
    }

    fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    s.parse()
                        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{s}`")))
                })
                .collect(),
        }
    }
}

fn parse_seeds(v: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("key `seeds`: cannot parse `{v}`"));
    if let Some((a, b)) = v.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    v.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
}

fn default_methods(task: Task) -> Vec<Method> {
    match task {
        Task::Opinion => vec![
            Method::Uncontrolled,
            Method::KlMpc,
            Method::KlOpenLoop,
            Method::CeMpc,
            Method::FdMpc,
            Method::Greedy,
            Method::BaseIntensity,
        ],
        Task::Broadcast => vec![
            Method::Uncontrolled,
            Method::KlMpc,
            Method::KlOpenLoop,
            Method::CeMpc,
            Method::BaseIntensity,
        ],
        Task::Heldout => vec![Method::KlMpc, Method::Oracle, Method::Random],
    }
}

/// `T / 10` rounded to a whole number of bins, at least one bin.
fn default_lookahead(horizon: f64, bins: usize) -> f64 {
    if bins.is_multiple_of(10) {
        return horizon / 10.0;
    }
    (bins as f64 / 10.0).round().max(1.0) * horizon / bins as f64
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let unknown: Vec<&str> = pairs
            .keys()
            .map(String::as_str)
            .filter(|k| !REQUIRED.contains(k) && !OPTIONAL.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let f = Fields(pairs);
        let task: Task = f.required("task")?;
        let horizon: f64 = f.required("horizon")?;
        let bins: usize = f.required("bins")?;
        let samples: usize = f.required("samples")?;
        let gamma: f64 = f.required("gamma")?;
        f.required::<String>("seeds")?;
        let seeds = parse_seeds(&f.0["seeds"])?;

        let dc = BaselineConfig::default();
        let ce = CrossEntropyConfig {
            population: f.get("ce_population", dc.cross_entropy.population)?,
            elite_fraction: f.get("ce_elite_fraction", dc.cross_entropy.elite_fraction)?,
            init_mean: f.get("ce_init_mean", dc.cross_entropy.init_mean)?,
            init_std: f.get("ce_init_std", dc.cross_entropy.init_std)?,
            max_iterations: f.get("ce_iterations", dc.cross_entropy.max_iterations)?,
            tol: f.get("ce_tol", dc.cross_entropy.tol)?,
            min_std: f.get("ce_min_std", dc.cross_entropy.min_std)?,
        };
        let fd = FiniteDifferenceConfig {
            perturbations: f.get("fd_perturbations", dc.finite_difference.perturbations)?,
            sigma: f.get("fd_sigma", dc.finite_difference.sigma)?,
            step_size: f.get("fd_step", dc.finite_difference.step_size)?,
            max_step: f.get("fd_max_step", dc.finite_difference.max_step)?,
            iterations: f.get("fd_iterations", dc.finite_difference.iterations)?,
        };
        let greedy = GreedyConfig {
            boost: f.get("greedy_boost", dc.greedy.boost)?,
            budget: f.get("greedy_budget", dc.greedy.budget)?,
            ..dc.greedy
        };
        let cfg = Self {
            task,
            control: ControlConfig {
                horizon,
                bins,
                lookahead: f.get("lookahead", default_lookahead(horizon, bins))?,
                samples,
                euler_step: f.get("euler_step", 0.1)?,
                bounds: ClampBounds {
                    min: f.get("clamp_min", 1e-3)?,
                    max: f.get("clamp_max", 1e3)?,
                },
            },
            gamma,
            seeds,
            methods: f.list("methods", default_methods(task))?,
            opinion: {
                let d = OpinionParams::default();
                OpinionParams {
                    users: f.get("users", d.users)?,
                    initial_opinion: f.get("initial_opinion", d.initial_opinion)?,
                    target: f.get("target", d.target)?,
                    beta: f.get("beta", d.beta)?,
                    baseline_low: f.get("baseline_low", d.baseline_low)?,
                    baseline_high: f.get("baseline_high", d.baseline_high)?,
                    base_rate: f.get("base_rate", d.base_rate)?,
                    density: f.get("density", d.density)?,
                    weight_low: f.get("weight_low", d.weight_low)?,
                    weight_high: f.get("weight_high", d.weight_high)?,
                    decay: f.get("decay", d.decay)?,
                }
            },
            broadcast: {
                let d = BroadcastParams::default();
                BroadcastParams {
                    followers: f.get("followers", d.followers)?,
                    broadcaster_rate: f.get("broadcaster_rate", d.broadcaster_rate)?,
                    competitor_rate: f.get("competitor_rate", d.competitor_rate)?,
                    competitor_excitation: f.get("competitor_excitation", d.competitor_excitation)?,
                    decay: f.get("decay", d.decay)?,
                    initial_rank: f.get("initial_rank", d.initial_rank)?,
                }
            },
            heldout: HeldoutParams {
                intervals: f.get("intervals", HeldoutParams::default().intervals)?,
                runs: f.get("heldout_runs", HeldoutParams::default().runs)?,
            },
            baseline: BaselineConfig {
                cross_entropy: ce,
                finite_difference: fd,
                greedy,
                openloop_segments: f.get("openloop_segments", dc.openloop_segments)?,
            },
            greedy_thresholds: f.list("greedy_thresholds", vec![1.0, 2.0, 3.0, 4.0, 5.0])?,
            greedy_observations: f.list("greedy_observations", vec![1, 10, 50, 100])?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        self.baseline.validate()?;
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config(format!("gamma = {} must be > 0", self.gamma)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must be nonempty".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::Config("methods contain duplicates".into()));
        }
        for m in &self.methods {
            let held_only = matches!(m, Method::Oracle | Method::Random);
            let heldout = self.task == Task::Heldout;
            if (held_only && !heldout) || (heldout && *m == Method::Greedy) {
                return Err(Error::Config(format!(
                    "method {m} is not available for task {}",
                    self.task
                )));
            }
        }
        if self.greedy_thresholds.iter().any(|&k| !(k >= 1.0))
            || self.greedy_observations.contains(&0)
            || self.greedy_thresholds.is_empty()
            || self.greedy_observations.is_empty()
        {
            return Err(Error::Config(
                "greedy grid needs thresholds >= 1 and observation counts >= 1".into(),
            ));
        }
        match self.task {
            Task::Opinion => {
                let o = &self.opinion;
                if o.users == 0 || !(o.baseline_high >= o.baseline_low) || !(o.base_rate >= 0.0) || !(o.decay > 0.0) {
                    return Err(Error::Config("opinion parameters out of range".into()));
                }
            }
            Task::Broadcast | Task::Heldout => {
                let b = &self.broadcast;
                if b.followers == 0 || !(b.decay > 0.0) {
                    return Err(Error::Config("broadcast parameters out of range".into()));
                }
                if self.task == Task::Heldout && (self.heldout.intervals < 3 || self.heldout.runs == 0) {
                    return Err(Error::Config(
                        "held-out evaluation needs >= 3 intervals and >= 1 run".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
