//! Experiment driver: configuration, the round loop, checkpoints and
//! output files.

pub mod config;
pub mod metrics;
pub mod runner;

pub use config::{Delivery, FiscalConfig, LearningConfig, RunConfig, RunSection, VotingConfig, VotingMode};
pub use metrics::{gini, plot_data, MetricsWriter, PeriodRow, RoundRecord, Summary};
pub use runner::{
    checkpoint_path, run_experiment, EvalEpisode, EvalReport, Experiment, RoundOutput, RunOptions, RunOutcome,
};
