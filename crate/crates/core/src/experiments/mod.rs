//! Baselines, metrics, configuration and the experiment harness.

pub mod baselines;
pub mod config;
pub mod metrics;
pub mod output;
pub mod runner;

pub use baselines::{auction_assign, AuctionParams, AuctionPolicy, EmotionModel, EmotionParams, EmotionPolicy};
pub use config::{ExperimentConfig, PolicyKind, TerrainConfig};
pub use metrics::{orientation_rmse, transition_rmse, TrajectoryLog};
pub use output::write_report;
pub use runner::{
    build_simulation, run_experiment, run_experiment_with, train_dqn, train_dqn_with, EpisodeResult, ExperimentReport, SummaryRow,
    TrainingReport,
};
