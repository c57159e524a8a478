//! Minimal maximum-likelihood fitting: homogeneous Poisson (any dimension)
//! and univariate exponential-kernel Hawkes.

use crate::error::{Error, Result};

use super::{EventSequence, HawkesModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFamily {
    Poisson,
    Hawkes1d,
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "hawkes1d" => Ok(Self::Hawkes1d),
            other => Err(Error::invalid(format!(
                "unknown model family '{other}' (poisson | hawkes1d)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: HawkesModel,
    pub log_likelihood: f64,
    /// Some dimension had no events, so its fitted rate sits on the boundary 0.
    pub degenerate: bool,
    /// False if the search stopped on its evaluation budget.
    pub converged: bool,
    pub evaluations: usize,
}

/// Search settings for the univariate Hawkes fit.
#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evaluations: usize,
    /// Candidates with `alpha / omega` above this are rejected.
    pub max_branching: f64,
    /// Holds the decay at this value and searches only `(mu, alpha)`.
    pub fixed_omega: Option<f64>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.5,
            min_step: 1e-7,
            max_evaluations: 4000,
            max_branching: 0.999,
            fixed_omega: None,
        }
    }
}

pub fn fit_mle(events: &EventSequence, family: ModelFamily) -> Result<FitResult> {
    match family {
        ModelFamily::Poisson => fit_poisson(events),
        ModelFamily::Hawkes1d => fit_hawkes1d(events, SearchConfig::default()),
    }
}

/// `rate_i = count_i / window length`, the exact MLE.
pub fn fit_poisson(events: &EventSequence) -> Result<FitResult> {
    let length = events.end() - events.start();
    if !(length > 0.0) {
        return Err(Error::invalid("cannot fit on an empty window"));
    }
    let rates: Vec<f64> = (0..events.dims()).map(|i| events.count(i) as f64 / length).collect();
    let degenerate = rates.contains(&0.0);
    if degenerate {
        log::warn!("Poisson fit: some dimension has no events, rate set to 0");
    }
    let model = HawkesModel::poisson(rates)?;
    let log_likelihood = super::log_likelihood(&model, events)?;
    Ok(FitResult {
        model,
        log_likelihood,
        degenerate,
        converged: true,
        evaluations: 1,
    })
}

/// Log-likelihood of a univariate exponential Hawkes process in O(n) via
/// `A_k = exp(-omega (t_k - t_{k-1})) (1 + A_{k-1})`.
pub fn hawkes1d_log_likelihood(times: &[f64], start: f64, end: f64, mu: f64, alpha: f64, omega: f64) -> f64 {
    let mut log_sum = 0.0;
    let mut a = 0.0;
    let mut prev = f64::NAN;
    let mut tail = 0.0;
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            a = (-omega * (t - prev)).exp() * (1.0 + a);
        }
        let lam = mu + alpha * a;
        if lam <= 0.0 {
            return f64::NEG_INFINITY;
        }
        log_sum += lam.ln();
        tail += -(-omega * (end - t)).exp_m1();
        prev = t;
    }
    log_sum - mu * (end - start) - alpha / omega * tail
}

/// Multi-start coordinate search over `(log mu, log alpha, log omega)`.
///
/// Each start moves one coordinate at a time by `+-step`, keeping any
/// improvement; when no coordinate improves the step is halved. The
/// returned parameters have the highest likelihood among every candidate
/// evaluated.
pub fn fit_hawkes1d(events: &EventSequence, cfg: SearchConfig) -> Result<FitResult> {
    if events.dims() != 1 {
        return Err(Error::invalid("hawkes1d fit needs a one-dimensional event sequence"));
    }
    let (start, end) = (events.start(), events.end());
    let length = end - start;
    if !(length > 0.0) {
        return Err(Error::invalid("cannot fit on an empty window"));
    }
    let times: Vec<f64> = events.times(0).collect();
    if times.is_empty() {
        let mut fit = fit_poisson(events)?;
        fit.degenerate = true;
        return Ok(fit);
    }
    if let Some(w) = cfg.fixed_omega {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::invalid(format!("fixed decay {w} must be positive")));
        }
    }
    let rate = times.len() as f64 / length;
    let coords = if cfg.fixed_omega.is_some() { 2 } else { 3 };
    let omegas: &[f64] = match &cfg.fixed_omega {
        Some(w) => std::slice::from_ref(w),
        None => &[0.5, 1.0, 3.0],
    };
    let objective = |p: &[f64; 3]| -> f64 {
        let (mu, alpha, omega) = (p[0].exp(), p[1].exp(), p[2].exp());
        if !(alpha / omega <= cfg.max_branching) {
            return f64::NEG_INFINITY;
        }
        hawkes1d_log_likelihood(&times, start, end, mu, alpha, omega)
    };

    let mut best = ([rate.ln(), f64::NEG_INFINITY, 0.0], f64::NEG_INFINITY);
    let mut evaluations = 0usize;
    let mut converged = true;
    let per_start = cfg.max_evaluations / (3 * omegas.len());
    for &ratio in &[0.2, 0.5, 0.8] {
        for &omega in omegas {
            let mut p = [(rate * (1.0 - ratio)).ln(), (ratio * omega).ln(), f64::ln(omega)];
            let mut value = objective(&p);
            let mut used = 1;
            let mut step = cfg.initial_step;
            while step >= cfg.min_step {
                if used >= per_start {
                    converged = false;
                    break;
                }
                let mut improved = false;
                for c in 0..coords {
                    for dir in [1.0, -1.0] {
                        let mut q = p;
                        q[c] += dir * step;
                        let v = objective(&q);
                        used += 1;
                        if v > value {
                            p = q;
                            value = v;
                            improved = true;
                            break;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            evaluations += used;
            if value > best.1 {
                best = (p, value);
            }
        }
    }
    if !converged {
        log::debug!("hawkes1d fit hit its evaluation budget; returning best found");
    }
    let [lm, la, lw] = best.0;
    let model = HawkesModel::univariate(lm.exp(), la.exp(), cfg.fixed_omega.unwrap_or(lw.exp()))?;
    Ok(FitResult {
        model,
        log_likelihood: best.1,
        degenerate: false,
        converged,
        evaluations,
    })
}
