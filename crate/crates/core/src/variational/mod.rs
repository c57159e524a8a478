//! Importance weights from the optimal measure and the closed-form
//! per-bin policy estimator.

pub mod discrete;
mod drift;
mod estimate;
mod likelihood_ratio;
mod weights;

pub use drift::{
    drift_policy, sample_drift_paths, simulate_drift_path, DriftAffineSystem, DriftPath, DriftPolicyEstimate,
    LinearDriftSystem,
};
pub use estimate::{estimate_policy, perbin_objective_min, EstimatorConfig, PolicyEstimate};
pub use likelihood_ratio::likelihood_ratio_exponent;
pub use weights::{compute_weights, effective_sample_size, WeightedSampleBatch};
