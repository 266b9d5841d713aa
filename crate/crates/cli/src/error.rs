use std::fmt;

use cemlab_core::asymptotics::AsymptoticsError;
use cemlab_core::fem::FemError;
use cemlab_core::registry::ForwardError;

/// Exit code 1: the configuration is invalid. Exit code 2: a solve or an
/// output write failed.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config { field: String, message: String },
    Numerical(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl fmt::Display) -> Self {
        CliError::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn numerical(message: impl fmt::Display) -> Self {
        CliError::Numerical(message.to_string())
    }

    pub fn code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }

    /// The single stderr line, `error:<code>: ...`.
    pub fn line(&self) -> String {
        let body = match self {
            CliError::Config { field, message } => format!("{field}: {message}"),
            CliError::Numerical(message) => message.clone(),
        };
        format!("error:{}: {}", self.code(), body.replace(['\n', '\r'], " "))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::numerical(format!("writing output: {e}"))
    }
}

impl From<FemError> for CliError {
    fn from(e: FemError) -> Self {
        match e {
            FemError::Geometry(_) | FemError::LayoutConflict(_) => CliError::config("electrodes", e),
            FemError::UnboundedDomain => CliError::config("domain.kind", e),
            FemError::InvalidGrading(_) | FemError::GradingTooAggressive { .. } => CliError::config("grading", e),
            FemError::UnknownConductivity(_) | FemError::NonPositiveConductivity { .. } => {
                CliError::config("conductivity", e)
            }
            FemError::CurrentCount { .. } => CliError::config("currents", e),
            other => CliError::numerical(other),
        }
    }
}

impl From<ForwardError> for CliError {
    fn from(e: ForwardError) -> Self {
        match e {
            ForwardError::UnknownSolver(_) => CliError::config("solver.kind", e),
            ForwardError::Unsupported { .. } => CliError::config("conductivity.kind", e),
            ForwardError::Geometry(_) => CliError::config("electrodes", e),
            ForwardError::Fem(f) => f.into(),
            other => CliError::numerical(other),
        }
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::TooFewMeshes(_) => CliError::config("convergence.meshes", e),
            AsymptoticsError::InvalidWindow(..) => CliError::config("fit.window", e),
            AsymptoticsError::Fem(f) => f.into(),
            other => CliError::numerical(other),
        }
    }
}
