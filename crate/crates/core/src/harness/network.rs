use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Random sparse `M x M` weight matrix, row-major with a zero diagonal.
/// Each off-diagonal entry is nonzero with probability `density` and then
/// uniform on `[low, high]`. Entries are drawn in row-major order from
/// `stream`.
pub fn gen_network(users: usize, density: f64, low: f64, high: f64, stream: &SeedStream) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(format!("network density {density} must lie in [0, 1]")));
    }
    if !(low >= 0.0 && high >= low && high.is_finite()) {
        return Err(Error::invalid(format!(
            "weight range [{low}, {high}] must be nonnegative and ordered"
        )));
    }
    let mut rng = stream.rng();
    let mut a = vec![0.0; users * users];
    for i in 0..users {
        for j in 0..users {
            if i != j && rng.random_bool(density) {
                a[i * users + j] = if high > low { rng.random_range(low..=high) } else { low };
            }
        }
    }
    Ok(a)
}
