use crate::error::{Error, Result};
use crate::numeric::spectral_radius_nonneg;

const POWER_ITERATIONS: usize = 100;
const POWER_TOLERANCE: f64 = 1e-9;

/// Multivariate Hawkes process with a shared exponential kernel
/// `exp(-omega * t)`:
///
/// ```text
/// lambda_i(t) = mu_i + sum_j alpha_ij * sum_{t_j < t} exp(-omega (t - t_j))
/// ```
///
/// `alpha[i][j]` is the jump in the intensity of dimension `i` caused by an
/// event in dimension `j`. With `alpha = 0` this is a homogeneous Poisson
/// process.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    mu: Vec<f64>,
    alpha: Vec<f64>,
    omega: f64,
    /// Nonzero entries of each column of `alpha`: `columns[j] = [(i, alpha_ij)]`.
    columns: Vec<Vec<(usize, f64)>>,
    branching: f64,
}

impl HawkesModel {
    /// Builds a model from base rates, a row-major `M x M` excitation matrix and the decay.
    pub fn new(mu: Vec<f64>, alpha: Vec<f64>, omega: f64) -> Result<Self> {
        let m = mu.len();
        if m == 0 {
            return Err(Error::invalid("Hawkes model needs at least one dimension"));
        }
        if alpha.len() != m * m {
            return Err(Error::invalid(format!(
                "excitation matrix has {} entries, expected {}",
                alpha.len(),
                m * m
            )));
        }
        if let Some(i) = mu.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "base rate mu[{i}] = {} must be finite and >= 0",
                mu[i]
            )));
        }
        if let Some(k) = alpha.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!(
                "alpha[{}][{}] = {} must be finite and >= 0",
                k / m,
                k % m,
                alpha[k]
            )));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::invalid(format!("kernel decay omega = {omega} must be > 0")));
        }
        let mut columns = vec![Vec::new(); m];
        for i in 0..m {
            for (j, col) in columns.iter_mut().enumerate() {
                let a = alpha[i * m + j];
                if a > 0.0 {
                    col.push((i, a));
                }
            }
        }
        let scaled: Vec<f64> = alpha.iter().map(|a| a / omega).collect();
        let (branching, converged) = spectral_radius_nonneg(&scaled, m, POWER_ITERATIONS, POWER_TOLERANCE);
        if !converged {
            log::debug!("spectral radius power iteration did not reach tolerance; estimate {branching}");
        }
        if branching >= 1.0 {
            log::warn!("Hawkes model is not stationary (spectral radius of alpha/omega = {branching:.4})");
        }
        Ok(Self {
            mu,
            alpha,
            omega,
            columns,
            branching,
        })
    }

    pub fn from_rows(mu: Vec<f64>, alpha: &[Vec<f64>], omega: f64) -> Result<Self> {
        if alpha.iter().any(|r| r.len() != mu.len()) {
            return Err(Error::invalid("excitation matrix rows must have length M"));
        }
        Self::new(mu, alpha.concat(), omega)
    }

    pub fn poisson(rates: Vec<f64>) -> Result<Self> {
        let m = rates.len();
        Self::new(rates, vec![0.0; m * m], 1.0)
    }

    pub fn univariate(mu: f64, alpha: f64, omega: f64) -> Result<Self> {
        Self::new(vec![mu], vec![alpha], omega)
    }

    pub fn dims(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        self.alpha[i * self.dims() + j]
    }

    pub fn alpha_matrix(&self) -> &[f64] {
        &self.alpha
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Dimensions excited by an event in `j`, with their jump sizes.
    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.columns[j]
    }

    pub fn is_poisson(&self) -> bool {
        self.columns.iter().all(Vec::is_empty)
    }

    /// Spectral radius of `alpha / omega`.
    pub fn branching_ratio(&self) -> f64 {
        self.branching
    }

    pub fn is_stationary(&self) -> bool {
        self.branching < 1.0
    }

    /// Long-run event rates `(I - alpha/omega)^-1 mu`, if the process is stationary.
    pub fn stationary_rates(&self) -> Option<Vec<f64>> {
        if !self.is_stationary() {
            return None;
        }
        let m = self.dims();
        let a = nalgebra::DMatrix::from_fn(m, m, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - self.alpha(i, j) / self.omega
        });
        let b = nalgebra::DVector::from_column_slice(&self.mu);
        a.lu().solve(&b).map(|x| x.iter().copied().collect())
    }
}
