//! Experiment orchestration: configuration, synthetic networks, the
//! opinion and broadcast studies, held-out evaluation and report files.

mod config;
mod network;
mod report;
mod selftest;
mod studies;

pub use config::{BroadcastParams, ExperimentConfig, HeldoutParams, Method, OpinionParams, Task};
pub use network::gen_network;
pub use report::{pairwise_concordance, ExperimentReport, RunRecord};
pub use selftest::{tilting_check, TiltingCheck};
pub use studies::{
    fit_broadcast, run_control_method, run_control_study, run_heldout_eval, scenario, time_average, Scenario,
};

/// Runs the study matching `cfg.task`.
pub fn run_experiment(cfg: &ExperimentConfig) -> crate::Result<ExperimentReport> {
    match cfg.task {
        Task::Heldout => run_heldout_eval(cfg),
        Task::Opinion | Task::Broadcast => run_control_study(cfg),
    }
}
