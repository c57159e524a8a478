//! Jump-diffusion state dynamics driven by point processes, integrated by
//! event-driven Euler-Maruyama.

mod models;
mod simulate;
mod trajectory;

pub use models::{BroadcastModel, Dynamics, OpinionModel, StartState, System};
pub(crate) use simulate::ordered_map;
pub use simulate::{
    batch_rollouts, batch_sample, euler_grid, sample_stream, simulate_path, simulate_rollout, simulate_trajectory,
    PathSink, Rollout,
};
pub use trajectory::{PointKind, Trajectory};
