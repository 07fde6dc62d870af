use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Problem data violates a structural invariant (asymmetric diffusion,
    /// non-finite samples, mismatched dimensions, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A caller-supplied argument is out of contract.
    #[error("argument error: {0}")]
    Argument(String),

    /// The diffusion matrix left the admissible ellipticity class.
    #[error("ellipticity error: {0}")]
    Ellipticity(String),

    /// A linear or nonlinear solve failed to converge.
    #[error("solver error: {0}")]
    Solver(String),

    /// A required upstream result is missing.
    #[error("dependency error: {0}")]
    Dependency(String),

    #[error("parse error at {line}:{col}: {message}")]
    Parse {
        message: String,
        line: usize,
        col: usize,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
