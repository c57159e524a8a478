use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sde::{PathSink, PointKind, Trajectory};

/// Extension point for running and terminal costs beyond the built-in ones.
pub trait StateCost: Send + Sync {
    fn running(&self, x: &[f64]) -> f64;

    fn terminal(&self, x: &[f64]) -> f64 {
        self.running(x)
    }

    /// Value reported in per-bin diagnostics; defaults to the running cost.
    fn instantaneous(&self, x: &[f64]) -> f64 {
        self.running(x)
    }
}

#[derive(Clone)]
pub enum CostKind {
    /// `q = |x - a|^2`, `phi = |x(T) - a|^2`.
    LeastSquares {
        target: Vec<f64>,
    },
    /// `q = -sum x_i`, `phi = -sum x_i(T)`.
    InfluenceMax,
    /// `q = sum_j x_j` over follower feeds, `phi` likewise.
    BroadcastRank,
    Custom(Arc<dyn StateCost>),
}

impl fmt::Debug for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CostKind::LeastSquares { target } => f.debug_struct("LeastSquares").field("target", target).finish(),
            CostKind::InfluenceMax => f.write_str("InfluenceMax"),
            CostKind::BroadcastRank => f.write_str("BroadcastRank"),
            CostKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// State cost `S(x) = phi(x(T)) + int q(x(t)) dt` with its trade-off `gamma`.
#[derive(Debug, Clone)]
pub struct CostSpec {
    kind: CostKind,
    gamma: f64,
}

impl CostSpec {
    pub fn new(kind: CostKind, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("gamma = {gamma} must be > 0")));
        }
        if let CostKind::LeastSquares { target } = &kind {
            if target.is_empty() || target.iter().any(|a| !a.is_finite()) {
                return Err(Error::invalid("least-squares target must be a finite, nonempty vector"));
            }
        }
        Ok(Self { kind, gamma })
    }

    pub fn least_squares(target: Vec<f64>, gamma: f64) -> Result<Self> {
        Self::new(CostKind::LeastSquares { target }, gamma)
    }

    pub fn influence_max(gamma: f64) -> Result<Self> {
        Self::new(CostKind::InfluenceMax, gamma)
    }

    pub fn broadcast_rank(gamma: f64) -> Result<Self> {
        Self::new(CostKind::BroadcastRank, gamma)
    }

    pub fn custom(cost: Arc<dyn StateCost>, gamma: f64) -> Result<Self> {
        Self::new(CostKind::Custom(cost), gamma)
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.kind.clone(), gamma)
    }

    pub fn check_dims(&self, dims: usize) -> Result<()> {
        match &self.kind {
            CostKind::LeastSquares { target } if target.len() != dims => Err(Error::invalid(format!(
                "cost target has {} entries, state has {dims}",
                target.len()
            ))),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn running(&self, x: &[f64]) -> f64 {
        match &self.kind {
            CostKind::LeastSquares { target } => x.iter().zip(target).map(|(v, a)| (v - a) * (v - a)).sum(),
            CostKind::InfluenceMax => -x.iter().sum::<f64>(),
            CostKind::BroadcastRank => x.iter().sum(),
            CostKind::Custom(c) => c.running(x),
        }
    }

    pub fn terminal(&self, x: &[f64]) -> f64 {
        match &self.kind {
            CostKind::Custom(c) => c.terminal(x),
            _ => self.running(x),
        }
    }

    /// Diagnostic cost at one instant: `|x - a|` for least squares, `q(x)` otherwise.
    pub fn instantaneous(&self, x: &[f64]) -> f64 {
        match &self.kind {
            CostKind::LeastSquares { .. } => self.running(x).sqrt(),
            CostKind::Custom(c) => c.instantaneous(x),
            _ => self.running(x),
        }
    }

    pub fn accumulator(&self) -> CostAccumulator<'_> {
        CostAccumulator {
            spec: self,
            integral: 0.0,
            previous: None,
            last: Vec::new(),
        }
    }

    /// `phi(x(T))` plus the left-endpoint sum of `q` over the recorded points;
    /// the terminal point only enters through `phi`.
    pub fn state_cost(&self, traj: &Trajectory) -> Result<f64> {
        self.check_dims(traj.dims())?;
        let mut acc = self.accumulator();
        for p in 0..traj.len() {
            acc.point(traj.times()[p], traj.state(p), traj.kinds()[p]);
        }
        Ok(acc.total())
    }
}

/// Computes the state cost while a path is being integrated; agrees bit for
/// bit with [`CostSpec::state_cost`] on the recorded trajectory.
#[derive(Debug)]
pub struct CostAccumulator<'a> {
    spec: &'a CostSpec,
    integral: f64,
    previous: Option<(f64, f64)>,
    last: Vec<f64>,
}

impl CostAccumulator<'_> {
    pub fn total(&self) -> f64 {
        if self.last.is_empty() {
            return self.integral;
        }
        self.integral + self.spec.terminal(&self.last)
    }

    /// Running integral so far, without the terminal term.
    pub fn running_integral(&self) -> f64 {
        self.integral
    }
}

impl PathSink for CostAccumulator<'_> {
    #[inline]
    fn point(&mut self, time: f64, x: &[f64], _kind: PointKind) {
        if let Some((t, q)) = self.previous {
            self.integral += q * (time - t);
        }
        self.previous = Some((time, self.spec.running(x)));
        self.last.clear();
        self.last.extend_from_slice(x);
    }
}
