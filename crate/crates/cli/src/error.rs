use thiserror::Error;

use crate::config::ConfigError;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    /// A verify check failed, or an I/O or other runtime error.
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    /// Cusp, singular point or degenerate configuration.
    pub const SINGULAR: u8 = 3;
    pub const NO_CONVERGENCE: u8 = 4;
    pub const FORM_INVARIANCE: u8 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] dtoda::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{failed} of {total} checks failed")]
    VerifyFailed { failed: usize, total: usize },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use dtoda::Error as E;
        match self {
            CliError::Config(_) | CliError::Usage(_) => exit::CONFIG,
            CliError::Core(e) => match e {
                E::CuspDetected(_)
                | E::SingularPoint(_)
                | E::DegenerateConfiguration(_)
                | E::DegenerateJacobian
                | E::DegenerateTangent
                | E::ContourThroughPole
                | E::StringViolated(_)
                | E::NonFinite
                | E::ZeroArgument
                | E::NonInvertibleLeading => exit::SINGULAR,
                E::NoConvergence { .. } => exit::NO_CONVERGENCE,
                E::FormInvarianceViolated(_) => exit::FORM_INVARIANCE,
                E::InvalidMap(_) | E::Parse { .. } | E::IndexRangeViolation(_) => exit::CONFIG,
                E::WindowTooWide(_) | E::Unsupported(_) => exit::FAILURE,
            },
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) | CliError::VerifyFailed { .. } => exit::FAILURE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes() {
        assert_eq!(CliError::from(dtoda::Error::CuspDetected(0.0)).exit_code(), 3);
        assert_eq!(
            CliError::from(dtoda::Error::NoConvergence {
                iterations: 1,
                residual: 1.0
            })
            .exit_code(),
            4
        );
        assert_eq!(CliError::from(dtoda::Error::FormInvarianceViolated(1.0)).exit_code(), 5);
        assert_eq!(CliError::VerifyFailed { failed: 1, total: 2 }.exit_code(), 1);
    }
}
