use thiserror::Error;

/// Errors produced by construction, validation and solver routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its documented range.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structural validation of an input failed (evenness, ellipticity, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A mode-by-mode inversion hit a multiplier below the hard threshold.
    #[error("ill-conditioned inversion: mode {mode} has multiplier {multiplier:.3e}")]
    IllConditioned { mode: usize, multiplier: f64 },

    /// Mismatched or inadmissible arguments to an operation.
    #[error("argument error: {0}")]
    Argument(String),

    /// A resource budget (grid nodes, ...) would be exceeded.
    #[error("resource error: {0}")]
    Resource(String),

    /// An iterative method did not reach its tolerance.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature tolerance error: {0}")]
    Quadrature(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}
