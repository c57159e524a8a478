//! Comparison controllers: cross-entropy and finite-difference policy
//! search (receding-horizon and open-loop), a threshold-triggered greedy
//! rule, and a one-shot base-rate scaling.

mod base_intensity;
mod greedy;
mod rollout_search;
mod search;

pub use base_intensity::base_intensity;
pub use greedy::{greedy_controller, greedy_direction, observation_bins, GreedyConfig};
pub use rollout_search::{run_search_mpc, run_search_openloop, search_policy, RolloutObjective, SearchMethod};
pub use search::{
    ce_update, cross_entropy, fd_gradient, finite_difference, BatchObjective, CrossEntropyConfig,
    FiniteDifferenceConfig, SearchResult,
};

use crate::error::{Error, Result};

/// Settings shared by all comparison controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub cross_entropy: CrossEntropyConfig,
    pub finite_difference: FiniteDifferenceConfig,
    pub greedy: GreedyConfig,
    /// Constant-control segments of the open-loop search policies.
    pub openloop_segments: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            cross_entropy: CrossEntropyConfig::default(),
            finite_difference: FiniteDifferenceConfig::default(),
            greedy: GreedyConfig::default(),
            openloop_segments: 10,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        self.cross_entropy.validate()?;
        self.finite_difference.validate()?;
        self.greedy.validate()?;
        if self.openloop_segments == 0 {
            return Err(Error::invalid("open-loop segments must be >= 1"));
        }
        Ok(())
    }
}
