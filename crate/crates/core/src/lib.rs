//! Variational intensity control of stochastic differential equations
//! driven by temporal point processes.
//!
//! The crate samples trajectories of a jump-diffusion system under its
//! uncontrolled law, weights them by `exp(-S / gamma)` where `S` is the
//! state cost, and turns the weighted event counts and intensity masses
//! into piecewise-constant multipliers of the event intensities. Wrapped in
//! a receding-horizon loop this steers opinion dynamics on a social network
//! or the feed rank of a broadcaster.
//!
//! Module map:
//!
//! * [`point_process`]: Hawkes/Poisson models, thinning, likelihood, fitting.
//! * [`sde`]: opinion and broadcast dynamics, event-driven Euler integration.
//! * [`cost`]: state costs and the KL control cost.
//! * [`variational`]: importance weights and the policy estimator.
//! * [`mpc`]: model-predictive and open-loop controllers.
//! * [`baselines`]: cross entropy, finite differences, greedy, base intensity.
//! * [`harness`]: experiment configs, synthetic networks, studies, reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod cost;
pub mod error;
pub mod harness;
pub mod mpc;
pub mod numeric;
pub mod point_process;
pub mod policy;
pub mod rng;
pub mod sde;
pub mod variational;

pub use error::{Error, Result};
