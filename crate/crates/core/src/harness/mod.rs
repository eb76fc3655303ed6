//! Closed-loop episodes, metrics, Monte-Carlo studies and their file output.

pub mod episode;
pub mod metrics;
pub mod output;
pub mod study;

pub use episode::{others_norm, run_episode, CertificationRecord, Controller, EpisodeConfig, EpisodeLog, StepRecord};
pub use metrics::{episode_metrics, heading_deviation_deg, EpisodeMetrics};
pub use output::{summary_toml, write_plot_csv, write_study_files, write_trajectory_csv};
pub use study::{run_study, run_study_on, EpisodeOutcome, StudyResult, StudySummary};
