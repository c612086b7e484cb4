use std::process::ExitCode;

use ffsense_core::bounds::BoundsError;
use ffsense_core::experiment::ExperimentError;
use ffsense_core::frames::FrameError;
use ffsense_core::io::IoError;
use ffsense_core::measurement::MeasurementError;
use ffsense_core::rip::RipError;
use ffsense_core::signals::SignalError;
use ffsense_core::solver::SolverError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        })
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        if e.is_schema() {
            CliError::Config(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Io(io) => io.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Infeasible { .. } => CliError::Failed(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

macro_rules! config_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Config(e.to_string())
            }
        }
    )*};
}

config_errors!(FrameError, SignalError, MeasurementError, RipError, BoundsError);
