use std::path::PathBuf;

use thiserror::Error;

use crate::solvers::SolveReport;

/// Stage of a time step, used to attribute solver failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Flow,
    CahnHilliard,
    Nutrient,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Flow => "flow",
            Stage::CahnHilliard => "cahn-hilliard",
            Stage::Nutrient => "nutrient",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("singular operator: {0}")]
    SingularOperator(String),

    #[error("{stage} solver did not converge after {} iterations (residual {:.3e})", report.iterations, report.final_residual)]
    NotConverged { stage: Stage, report: SolveReport },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the user-supplied configuration.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidArgument(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
