//! Library side of the `rpod` command: configuration parsing, experiment
//! orchestration, and the bound-table / inspection helpers.

pub mod config;
pub mod run;

pub use config::{ExperimentConfig, ProblemConfig, RpodConfig, StepSet};
pub use run::{bounds_table, build_problem, inspect, run_experiment, RunManifest, RunOutcome};

use rpod_core::Error as CoreError;

/// Exit code 2: configuration problems. Exit code 3: numerical failures.
/// Exit code 4: rank shortfall. Everything else maps to 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage {
        stage: &'static str,
        source: CoreError,
    },
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Stage { stage, source } => write!(f, "{stage} stage failed: {source}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } => match source {
                CoreError::RankShortfall { .. } | CoreError::AllRunsRankDeficient { .. } => 4,
                CoreError::Io(_) | CoreError::Parse { .. } | CoreError::Json(_) => 1,
                CoreError::InvalidParameter(_) | CoreError::IndexOutOfRange { .. } => 2,
                _ => 3,
            },
            CliError::Io(_) => 1,
        }
    }
}
