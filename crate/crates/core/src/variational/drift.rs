//! Drift-affine control `dx = (f(x) + G(x) u) dt + g(x) dw`, estimated with
//! the same weighted-sample scheme: by Girsanov the per-bin objective is
//! quadratic in `u^k` and
//!
//! ```text
//! u^k = E_P[w int G' S^-1 g dw] / E_P[w int G' S^-1 G dt],   S = g g'
//! ```

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::cost::CostSpec;
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::sde::{euler_grid, ordered_map, sample_stream, PathSink, PointKind};

use super::weights::{compute_weights, effective_sample_size};

pub trait DriftAffineSystem: Sync {
    fn state_dims(&self) -> usize;

    fn control_dims(&self) -> usize;

    /// Uncontrolled drift `f(x)`.
    fn drift(&self, x: &[f64]) -> DVector<f64>;

    /// Control matrix `G(x)`, `n x k`.
    fn control_matrix(&self, x: &[f64]) -> DMatrix<f64>;

    /// Diffusion matrix `g(x)`, `n x n`.
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64>;
}

/// `f(x) = A x + c` with constant `G` and `g`.
#[derive(Debug, Clone)]
pub struct LinearDriftSystem {
    pub drift_matrix: DMatrix<f64>,
    pub drift_offset: DVector<f64>,
    pub control: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
}

impl LinearDriftSystem {
    pub fn new(
        drift_matrix: DMatrix<f64>,
        drift_offset: DVector<f64>,
        control: DMatrix<f64>,
        diffusion: DMatrix<f64>,
    ) -> Result<Self> {
        let n = drift_offset.len();
        if drift_matrix.shape() != (n, n) || control.nrows() != n || diffusion.shape() != (n, n) {
            return Err(Error::invalid("drift system matrices have inconsistent shapes"));
        }
        Ok(Self {
            drift_matrix,
            drift_offset,
            control,
            diffusion,
        })
    }

    /// `dx = u dt + sigma dw` in one dimension.
    pub fn scalar(sigma: f64) -> Self {
        Self {
            drift_matrix: DMatrix::zeros(1, 1),
            drift_offset: DVector::zeros(1),
            control: DMatrix::identity(1, 1),
            diffusion: DMatrix::from_element(1, 1, sigma),
        }
    }
}

impl DriftAffineSystem for LinearDriftSystem {
    fn state_dims(&self) -> usize {
        self.drift_offset.len()
    }

    fn control_dims(&self) -> usize {
        self.control.ncols()
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        &self.drift_matrix * DVector::from_column_slice(x) + &self.drift_offset
    }

    fn control_matrix(&self, _x: &[f64]) -> DMatrix<f64> {
        self.control.clone()
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        self.diffusion.clone()
    }
}

/// Uncontrolled drift-diffusion path on a fixed Euler grid with its increments.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPath {
    dims: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    noise: Vec<f64>,
}

impl DriftPath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, p: usize) -> &[f64] {
        &self.states[p * self.dims..(p + 1) * self.dims]
    }

    pub fn increment(&self, p: usize) -> &[f64] {
        &self.noise[p * self.dims..(p + 1) * self.dims]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    pub fn state_cost(&self, spec: &CostSpec) -> Result<f64> {
        spec.check_dims(self.dims)?;
        let mut acc = spec.accumulator();
        for (p, &t) in self.times.iter().enumerate() {
            acc.point(t, self.state(p), PointKind::Grid);
        }
        Ok(acc.total())
    }
}

pub fn simulate_drift_path<S: DriftAffineSystem>(
    system: &S,
    x0: &[f64],
    start: f64,
    end: f64,
    dt: f64,
    stream: &SeedStream,
) -> Result<DriftPath> {
    let n = system.state_dims();
    if x0.len() != n {
        return Err(Error::invalid("initial state has the wrong dimension"));
    }
    if !(dt > 0.0 && end >= start) {
        return Err(Error::invalid("bad drift-path window or step"));
    }
    let grid = euler_grid(start, end, dt);
    let mut rng = stream.rng();
    let mut x = DVector::from_column_slice(x0);
    let mut states = x0.to_vec();
    let mut noise = Vec::with_capacity((grid.len() - 1) * n);
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        let dw = DVector::from_fn(n, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            h.sqrt() * z
        });
        let xs = x.as_slice().to_vec();
        x += system.drift(&xs) * h + system.diffusion(&xs) * &dw;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation {
                time: w[1],
                reason: "state became non-finite".into(),
            });
        }
        states.extend_from_slice(x.as_slice());
        noise.extend_from_slice(dw.as_slice());
    }
    Ok(DriftPath {
        dims: n,
        times: grid,
        states,
        noise,
    })
}

pub fn sample_drift_paths<S: DriftAffineSystem>(
    system: &S,
    x0: &[f64],
    start: f64,
    end: f64,
    dt: f64,
    samples: usize,
    stream: &SeedStream,
) -> Result<Vec<DriftPath>> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be >= 1"));
    }
    ordered_map(samples, |m| {
        simulate_drift_path(system, x0, start, end, dt, &sample_stream(stream, m))
    })
}

#[derive(Debug, Clone)]
pub struct DriftPolicyEstimate {
    pub edges: Vec<f64>,
    /// `K x k` control vectors, row-major.
    pub controls: Vec<f64>,
    /// Delta-method standard errors of `controls`.
    pub std_errors: Vec<f64>,
    pub ess: f64,
}

impl DriftPolicyEstimate {
    pub fn control(&self, bin: usize) -> &[f64] {
        let k = self.controls.len() / (self.edges.len() - 1);
        &self.controls[bin * k..(bin + 1) * k]
    }

    pub fn std_error(&self, bin: usize) -> &[f64] {
        let k = self.std_errors.len() / (self.edges.len() - 1);
        &self.std_errors[bin * k..(bin + 1) * k]
    }
}

type BinTerms = Vec<(DVector<f64>, DMatrix<f64>)>;

/// Per-bin `(int G' S^-1 g dw, int G' S^-1 G dt)` along one path.
fn path_terms<S: DriftAffineSystem>(system: &S, path: &DriftPath, edges: &[f64]) -> Result<BinTerms> {
    let k = system.control_dims();
    let bins = edges.len() - 1;
    let mut out = vec![(DVector::zeros(k), DMatrix::zeros(k, k)); bins];
    for p in 0..path.times.len() - 1 {
        let t = path.times[p];
        let h = path.times[p + 1] - t;
        if t < edges[0] || t >= edges[bins] {
            continue;
        }
        let b = edges.partition_point(|&e| e <= t) - 1;
        let x = path.state(p);
        let g = system.diffusion(x);
        let big_g = system.control_matrix(x);
        let sigma = &g * g.transpose();
        let inv = sigma
            .cholesky()
            .ok_or_else(|| Error::Estimation(format!("diffusion covariance is singular at t = {t}")))?
            .inverse();
        let gt_inv = big_g.transpose() * inv;
        let dw = DVector::from_column_slice(path.increment(p));
        out[b].0 += &gt_inv * &g * dw;
        out[b].1 += &gt_inv * &big_g * h;
    }
    Ok(out)
}

/// Weighted estimate of the per-bin drift controls from uncontrolled paths.
pub fn drift_policy<S: DriftAffineSystem>(
    system: &S,
    paths: &[DriftPath],
    costs: &[f64],
    gamma: f64,
    edges: &[f64],
) -> Result<DriftPolicyEstimate> {
    if paths.is_empty() || paths.len() != costs.len() {
        return Err(Error::invalid("need one cost per path and at least one path"));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("bin edges must be strictly increasing"));
    }
    let (_, weights) = compute_weights(costs, gamma)?;
    let terms = ordered_map(paths.len(), |m| path_terms(system, &paths[m], edges))?;
    let k = system.control_dims();
    let bins = edges.len() - 1;
    let mut controls = Vec::with_capacity(bins * k);
    let mut std_errors = Vec::with_capacity(bins * k);
    for b in 0..bins {
        let mut v = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for (w, t) in weights.iter().zip(&terms) {
            v += &t[b].0 * *w;
            h += &t[b].1 * *w;
        }
        let lu = h.clone().lu();
        let u = lu
            .solve(&v)
            .ok_or_else(|| Error::Estimation(format!("bin {b}: weighted control Gram matrix is singular")))?;
        let mut meat = DMatrix::zeros(k, k);
        for (w, t) in weights.iter().zip(&terms) {
            let psi = (&t[b].0 - &t[b].1 * &u) * *w;
            meat += &psi * psi.transpose();
        }
        let h_inv = lu
            .try_inverse()
            .unwrap_or_else(|| DMatrix::from_element(k, k, f64::NAN));
        let cov = &h_inv * meat * h_inv.transpose();
        controls.extend(u.iter());
        std_errors.extend((0..k).map(|i| cov[(i, i)].max(0.0).sqrt()));
    }
    Ok(DriftPolicyEstimate {
        edges: edges.to_vec(),
        controls,
        std_errors,
        ess: effective_sample_size(&weights),
    })
}
