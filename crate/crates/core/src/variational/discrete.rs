//! Exact free-energy arithmetic on finite outcome spaces, for checking the
//! variational bound `-gamma log E_P[exp(-S/gamma)] <= E_Q[S] + gamma KL(Q || P)`.

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() || p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid(format!("{name} must be a nonempty nonnegative vector")));
    }
    Ok(())
}

/// `-gamma log sum_n p_n exp(-S_n / gamma)`, evaluated with a log-sum-exp shift.
pub fn free_energy(p: &[f64], costs: &[f64], gamma: f64) -> Result<f64> {
    check_distribution(p, "P")?;
    if costs.len() != p.len() {
        return Err(Error::invalid("one cost per outcome"));
    }
    let min = costs
        .iter()
        .zip(p)
        .filter(|(_, &pn)| pn > 0.0)
        .map(|(c, _)| *c)
        .fold(f64::INFINITY, f64::min);
    let z = compensated_sum(p.iter().zip(costs).map(|(pn, c)| pn * (-(c - min) / gamma).exp()));
    Ok(min - gamma * z.ln())
}

/// `KL(Q || P) = sum_n q_n log(q_n / p_n)`; infinite if `Q` charges a `P`-null outcome.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    check_distribution(q, "Q")?;
    check_distribution(p, "P")?;
    if q.len() != p.len() {
        return Err(Error::invalid("distributions differ in length"));
    }
    let mut terms = Vec::with_capacity(q.len());
    for (&qn, &pn) in q.iter().zip(p) {
        if qn == 0.0 {
            continue;
        }
        if pn == 0.0 {
            return Ok(f64::INFINITY);
        }
        terms.push(qn * (qn / pn).ln());
    }
    Ok(compensated_sum(terms))
}

/// `E_Q[S] + gamma KL(Q || P)`.
pub fn variational_objective(q: &[f64], p: &[f64], costs: &[f64], gamma: f64) -> Result<f64> {
    let expected = compensated_sum(q.iter().zip(costs).map(|(qn, c)| qn * c));
    Ok(expected + gamma * kl_divergence(q, p)?)
}

/// `Q*_n ∝ p_n exp(-S_n / gamma)`, the minimizer of [`variational_objective`].
pub fn optimal_measure(p: &[f64], costs: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    tilt(p, |n| -(costs[n] - min) / gamma)
}

/// `Q_n ∝ p_n exp(log_tilt(n))`.
pub fn tilt(p: &[f64], log_tilt: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
    check_distribution(p, "P")?;
    let raw: Vec<f64> = p.iter().enumerate().map(|(n, pn)| pn * log_tilt(n).exp()).collect();
    let z = compensated_sum(raw.iter().copied());
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::invalid("tilted measure cannot be normalized"));
    }
    Ok(raw.into_iter().map(|v| v / z).collect())
}

/// Poisson(`mean`) pmf on `0..=max`, renormalized to sum to one.
pub fn truncated_poisson(mean: f64, max: usize) -> Result<Vec<f64>> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(Error::invalid(format!("Poisson mean {mean} must be >= 0")));
    }
    let mut p = Vec::with_capacity(max + 1);
    let mut term = (-mean).exp();
    for n in 0..=max {
        if n > 0 {
            term *= mean / n as f64;
        }
        p.push(term);
    }
    tilt(&p, |_| 0.0)
}
