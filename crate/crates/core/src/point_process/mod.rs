//! Multivariate Hawkes processes with an exponential kernel: intensities,
//! compensators, exact sampling, likelihood and fitting.

mod events;
mod fit;
mod intensity;
mod likelihood;
mod model;
mod thinning;

pub use events::{Event, EventSequence};
pub use fit::{fit_hawkes1d, fit_mle, fit_poisson, hawkes1d_log_likelihood, FitResult, ModelFamily, SearchConfig};
pub use intensity::{
    bin_counts, bin_masses, integrated_intensity, integrated_intensity_from, intensity_at, intensity_at_from,
    ProcessState,
};
pub use likelihood::{log_likelihood, log_likelihood_from};
pub use model::HawkesModel;
pub use thinning::{sample_thinning, sample_thinning_from, IntensityControl, MAX_EVENTS};
