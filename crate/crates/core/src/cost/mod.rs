//! State costs of trajectories and the KL control cost of a policy.

mod control;
mod state;

pub(crate) use control::clipped_bins;
pub use control::{control_cost, control_cost_density, kl_rate_cost};
pub use state::{CostAccumulator, CostKind, CostSpec, StateCost};
