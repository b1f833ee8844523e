use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A schedule, problem or run was assembled inconsistently.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A local objective was evaluated where it is undefined.
    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("degenerate curvature: {0}")]
    DegenerateCurvature(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A synchronous round finished with messages missing.
    #[error("protocol error: {0}")]
    Protocol(String),

    /// An agent needed data it was not entitled to receive.
    #[error("locality violation: {0}")]
    Locality(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
