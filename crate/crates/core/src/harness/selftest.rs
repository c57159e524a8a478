use std::sync::Arc;

use crate::cost::{CostKind, CostSpec, StateCost};
use crate::error::Result;
use crate::mpc::{estimate_from, ControlConfig};
use crate::numeric::compensated_sum;
use crate::point_process::HawkesModel;
use crate::policy::ClampBounds;
use crate::rng::SeedStream;
use crate::sde::System;
use crate::variational::discrete::{optimal_measure, truncated_poisson};

/// `S = N(T)`: no running cost, terminal cost equal to the count.
#[derive(Debug)]
struct FinalCount;

impl StateCost for FinalCount {
    fn running(&self, _x: &[f64]) -> f64 {
        0.0
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        x[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TiltingCheck {
    /// One-bin multiplier estimated from samples.
    pub estimate: f64,
    /// Mean count under the optimal measure from the exact pmf, divided by `T`.
    pub exact: f64,
}

impl TiltingCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        (self.estimate - self.exact).abs() <= tolerance
    }
}

/// Unit-rate Poisson on `[0, 1]` with cost `S = N(1)` and `gamma = 1`: the
/// optimal multiplier is `exp(-1)`. Compares the sampled estimate with
/// exact enumeration of the tilted count distribution.
pub fn tilting_check(samples: usize, seed: u64) -> Result<TiltingCheck> {
    let system = System::counting(HawkesModel::poisson(vec![1.0])?);
    let cost = CostSpec::new(CostKind::Custom(Arc::new(FinalCount)), 1.0)?;
    let cfg = ControlConfig {
        horizon: 1.0,
        bins: 1,
        lookahead: 1.0,
        samples,
        euler_step: 1.0,
        bounds: ClampBounds::default(),
    };
    let start = system.initial_state(0.0, 0.0);
    let (policy, _) = estimate_from(&system, &cost, &start, 1.0, &[0.0, 1.0], &cfg, &SeedStream::new(seed))?;
    let max = 60;
    let p = truncated_poisson(1.0, max)?;
    let counts: Vec<f64> = (0..=max).map(|n| n as f64).collect();
    let q = optimal_measure(&p, &counts, 1.0)?;
    let exact = compensated_sum(q.iter().zip(&counts).map(|(qn, n)| qn * n));
    Ok(TiltingCheck {
        estimate: policy.value(0, 0),
        exact,
    })
}
