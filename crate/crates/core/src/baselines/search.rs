//! Derivative-free policy search: cross entropy and finite differences over
//! a real parameter vector (log multipliers when used for control).

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{tag, SeedStream};

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropyConfig {
    pub population: usize,
    /// Share of the population refit as elites; at least one elite is kept.
    pub elite_fraction: f64,
    pub init_mean: f64,
    pub init_std: f64,
    pub max_iterations: usize,
    /// Stop when the elite mean cost changes by less than this between iterations.
    pub tol: f64,
    /// Stop once every coordinate's standard deviation falls below this.
    pub min_std: f64,
}

impl Default for CrossEntropyConfig {
    fn default() -> Self {
        Self {
            population: 10,
            elite_fraction: 0.2,
            init_mean: 0.0,
            init_std: 0.5,
            max_iterations: 4,
            tol: 0.0,
            min_std: 1e-9,
        }
    }
}

impl CrossEntropyConfig {
    pub fn elites(&self) -> usize {
        ((self.elite_fraction * self.population as f64).round() as usize).clamp(1, self.population.max(1))
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 || !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return Err(Error::invalid(
                "cross entropy needs population >= 1 and elite fraction in (0, 1]",
            ));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("cross entropy tolerance must be >= 0"));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite() && self.init_mean.is_finite()) {
            return Err(Error::invalid("cross entropy needs a finite mean and a positive std"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("cross entropy needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDifferenceConfig {
    /// Perturbations per gradient estimate.
    pub perturbations: usize,
    /// Standard deviation of each perturbation coordinate.
    pub sigma: f64,
    pub step_size: f64,
    /// Largest Euclidean length of one descent move.
    pub max_step: f64,
    pub iterations: usize,
}

impl Default for FiniteDifferenceConfig {
    fn default() -> Self {
        Self {
            perturbations: 16,
            sigma: 0.1,
            step_size: 0.1,
            max_step: 1.0,
            iterations: 2,
        }
    }
}

impl FiniteDifferenceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("perturbation sigma {} must be > 0", self.sigma)));
        }
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::invalid("step size must be >= 0"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("maximum step must be > 0"));
        }
        if self.perturbations == 0 || self.iterations == 0 {
            return Err(Error::invalid(
                "finite differences need perturbations and iterations >= 1",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Best parameters seen.
    pub params: Vec<f64>,
    pub best_cost: f64,
    /// Best-so-far cost after each iteration.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Evaluates a batch of parameter vectors; lets callers parallelize and use
/// common random numbers across candidates.
pub trait BatchObjective {
    fn dims(&self) -> usize;

    fn evaluate(&self, candidates: &[Vec<f64>]) -> Result<Vec<f64>>;
}

impl<F> BatchObjective for (usize, F)
where
    F: Fn(&[f64]) -> f64,
{
    fn dims(&self) -> usize {
        self.0
    }

    fn evaluate(&self, candidates: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(candidates.iter().map(|c| (self.1)(c)).collect())
    }
}

/// Refits a diagonal Gaussian to the `elites` lowest-cost candidates.
/// Returns `(mean, std)`; `std` is the population deviation of the elites.
pub fn ce_update(candidates: &[Vec<f64>], costs: &[f64], elites: usize) -> (Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    let chosen = &order[..elites.min(order.len())];
    let d = candidates[0].len();
    let n = chosen.len() as f64;
    let mut mean = vec![0.0; d];
    for &c in chosen {
        for (m, v) in mean.iter_mut().zip(&candidates[c]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for &c in chosen {
        for ((s, v), m) in var.iter_mut().zip(&candidates[c]).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    (mean, std)
}

/// Cross-entropy method: sample a diagonal Gaussian population, refit to
/// the elites, repeat. Iteration `g` draws from `stream.child(CROSS_ENTROPY, g)`.
pub fn cross_entropy<O: BatchObjective>(
    objective: &O,
    cfg: &CrossEntropyConfig,
    stream: &SeedStream,
) -> Result<SearchResult> {
    cfg.validate()?;
    let d = objective.dims();
    let mut mean = vec![cfg.init_mean; d];
    let mut std = vec![cfg.init_std; d];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut history = Vec::with_capacity(cfg.max_iterations);
    let mut evaluations = 0;
    let elites = cfg.elites();
    let mut last_elite_cost = f64::INFINITY;
    for g in 0..cfg.max_iterations {
        let mut rng = stream.child(tag::CROSS_ENTROPY, g as u64).rng();
        let candidates: Vec<Vec<f64>> = (0..cfg.population)
            .map(|_| {
                mean.iter()
                    .zip(&std)
                    .map(|(m, s)| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + s * z
                    })
                    .collect()
            })
            .collect();
        let costs = objective.evaluate(&candidates)?;
        evaluations += candidates.len();
        for (c, &j) in candidates.iter().zip(&costs) {
            if best.as_ref().is_none_or(|(_, b)| j < *b) {
                best = Some((c.clone(), j));
            }
        }
        history.push(best.as_ref().map_or(f64::INFINITY, |b| b.1));
        (mean, std) = ce_update(&candidates, &costs, elites);
        if std.iter().all(|&s| s < cfg.min_std) {
            log::debug!("cross entropy: distribution collapsed after {} iterations", g + 1);
            break;
        }
        let mut sorted = costs.clone();
        sorted.sort_by(f64::total_cmp);
        let elite_cost = sorted[..elites].iter().sum::<f64>() / elites as f64;
        if (elite_cost - last_elite_cost).abs() < cfg.tol {
            break;
        }
        last_elite_cost = elite_cost;
    }
    let (params, best_cost) = best.expect("at least one iteration");
    Ok(SearchResult {
        params,
        best_cost,
        history,
        evaluations,
    })
}

/// Least-squares gradient from perturbations `D` (rows) and cost changes
/// `dJ`: solves `(D'D) g = D' dJ`. `None` if `D'D` is singular.
fn regress_gradient(deltas: &[Vec<f64>], changes: &[f64]) -> Option<Vec<f64>> {
    let d = deltas[0].len();
    let x = DMatrix::from_fn(deltas.len(), d, |r, c| deltas[r][c]);
    let y = DVector::from_column_slice(changes);
    let gram = x.transpose() * &x;
    let rhs = x.transpose() * y;
    let chol = gram.cholesky()?;
    let g = chol.solve(&rhs);
    g.iter().all(|v| v.is_finite()).then(|| g.iter().copied().collect())
}

/// Gradient estimate at `params` from `perturbations` Gaussian perturbations
/// of scale `sigma`. Perturbations with a non-finite cost are left out of
/// the regression. A singular regression is retried once with twice the
/// perturbations. Returns the gradient, the cost at `params` and the number
/// of evaluations.
pub fn fd_gradient<O: BatchObjective>(
    objective: &O,
    params: &[f64],
    perturbations: usize,
    sigma: f64,
    stream: &SeedStream,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut count = perturbations;
    let mut evaluations = 0;
    for attempt in 0..2u64 {
        let mut rng = stream.child(tag::FINITE_DIFF, attempt).rng();
        let deltas: Vec<Vec<f64>> = (0..count)
            .map(|_| {
                (0..params.len())
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        sigma * z
                    })
                    .collect()
            })
            .collect();
        let mut candidates = Vec::with_capacity(count + 1);
        candidates.push(params.to_vec());
        candidates.extend(
            deltas
                .iter()
                .map(|dl| params.iter().zip(dl).map(|(p, e)| p + e).collect()),
        );
        let costs = objective.evaluate(&candidates)?;
        evaluations += candidates.len();
        let base = costs[0];
        if !base.is_finite() {
            return Err(Error::Estimation(format!(
                "finite differences: cost {base} at the current parameters"
            )));
        }
        let (kept, changes): (Vec<Vec<f64>>, Vec<f64>) = deltas
            .into_iter()
            .zip(&costs[1..])
            .filter(|(_, c)| c.is_finite())
            .map(|(dl, c)| (dl, c - base))
            .unzip();
        if kept.len() >= params.len() {
            if let Some(g) = regress_gradient(&kept, &changes) {
                return Ok((g, base, evaluations));
            }
        }
        log::debug!("finite-difference regression singular with {count} perturbations; retrying");
        count *= 2;
    }
    Err(Error::Estimation(format!(
        "finite-difference regression singular even with {count} perturbations for {} parameters",
        params.len()
    )))
}

/// Fixed-step gradient descent on finite-difference gradient estimates,
/// with each move capped at `max_step`; returns the best parameters seen. Iteration `g` uses `stream.child(FINITE_DIFF, g)`.
pub fn finite_difference<O: BatchObjective>(
    objective: &O,
    start: &[f64],
    cfg: &FiniteDifferenceConfig,
    stream: &SeedStream,
) -> Result<SearchResult> {
    cfg.validate()?;
    if start.len() != objective.dims() {
        return Err(Error::invalid("start parameters have the wrong dimension"));
    }
    let mut params = start.to_vec();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut evaluations = 0;
    for g in 0..cfg.iterations {
        let (grad, cost, used) = fd_gradient(
            objective,
            &params,
            cfg.perturbations,
            cfg.sigma,
            &stream.child(tag::FINITE_DIFF, g as u64),
        )?;
        evaluations += used;
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((params.clone(), cost));
        }
        history.push(best.as_ref().map_or(f64::INFINITY, |b| b.1));
        if cfg.step_size == 0.0 {
            break;
        }
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = cfg.step_size.min(cfg.max_step / norm);
        for (p, gr) in params.iter_mut().zip(&grad) {
            *p -= scale * gr;
        }
    }
    let (params, best_cost) = best.expect("at least one iteration");
    Ok(SearchResult {
        params,
        best_cost,
        history,
        evaluations,
    })
}
