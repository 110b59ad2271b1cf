use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("evaluation at w = 0 of a series with negative exponents")]
    ZeroArgument,
    #[error("requested window cannot be certified: {0}")]
    WindowTooWide(String),
    #[error("leading coefficient is zero, series not invertible")]
    NonInvertibleLeading,
    #[error("point {0} is within tolerance of a singularity")]
    SingularPoint(String),
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("degenerate configuration: sigma_min/sigma_max = {0:e}")]
    DegenerateConfiguration(f64),
    #[error("univalence lost: margin {0:e}")]
    CuspDetected(f64),
    #[error("no convergence after {iterations} iterations, residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate Jacobian")]
    DegenerateJacobian,
    #[error("form invariance violated: leakage {0:e}")]
    FormInvarianceViolated(f64),
    #[error("string equation violated: residual {0:e}")]
    StringViolated(f64),
    #[error("contour passes through a pole")]
    ContourThroughPole,
    #[error("index out of range: {0}")]
    IndexRangeViolation(String),
    #[error("degenerate tangent fit")]
    DegenerateTangent,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
