//! Small numeric helpers shared by the estimators.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.carry);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Mean and sample standard deviation; the deviation is 0 for fewer than two values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, var.sqrt())
}

/// Spectral radius of a nonnegative square matrix (row-major) by power
/// iteration on `A + I`, which shares the Perron vector of `A` and is
/// aperiodic. Returns the estimate and whether it converged to `tol`.
pub fn spectral_radius_nonneg(a: &[f64], n: usize, iterations: usize, tol: f64) -> (f64, bool) {
    debug_assert_eq!(a.len(), n * n);
    if n == 0 {
        return (0.0, true);
    }
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..iterations {
        for (i, wi) in w.iter_mut().enumerate() {
            let row = &a[i * n..(i + 1) * n];
            *wi = v[i] + row.iter().zip(&v).map(|(x, y)| x * y).sum::<f64>();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let next = norm - 1.0;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (next - estimate).abs() <= tol * next.abs().max(1.0) {
            return (next.max(0.0), true);
        }
        estimate = next;
    }
    (estimate.max(0.0), false)
}
