use thiserror::Error;

/// Errors raised across the estimation stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Not enough moments (or entries) were supplied.
    #[error("length error: need {needed} values, got {got}")]
    Length { needed: usize, got: usize },

    /// A numerical routine failed to bracket, converge or factor.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A pole of the integrand is a degenerate zero.
    #[error("singular residue at {at}: |s'| = {derivative:e}")]
    Singular { at: f64, derivative: f64 },

    /// Moment inversion failed at a named stage.
    #[error("inversion failed at {stage}: {detail}")]
    Inversion { stage: InversionStage, detail: String },

    /// Newton iteration did not converge.
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    /// The fallback chain of the estimator was exhausted.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// Malformed text input.
    #[error("parse error on line {line}: {detail}")]
    Parse { line: usize, detail: String },
}

/// Stage of the moment-to-measure inversion at which a failure occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionStage {
    /// The Hankel matrix is not positive definite.
    Invertibility,
    /// The characteristic polynomial has non-real roots.
    ComplexRoot,
    /// A recovered weight is not positive.
    Negativity,
    /// A recovered atom is not positive.
    Support,
}

impl std::fmt::Display for InversionStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            InversionStage::Invertibility => "hankel invertibility",
            InversionStage::ComplexRoot => "polynomial rooting",
            InversionStage::Negativity => "weight positivity",
            InversionStage::Support => "atom positivity",
        };
        f.write_str(name)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
