use thiserror::Error;

use crate::quantizer::Code;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown noise family {0:?} (expected gaussian, laplace or logistic)")]
    UnknownNoise(String),

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),

    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("code {0} is not emitted by this quantizer")]
    UnknownCode(Code),

    #[error("the outside code of a polytope list has no convex region")]
    OutsideCode,

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("exact evaluation unavailable ({0}); evaluate by Monte Carlo instead")]
    ExactPathUnavailable(String),

    #[error("Monte-Carlo count {0} is below the minimum of 100")]
    McCountTooSmall(usize),

    #[error("bin has zero probability; gradient is undefined")]
    ZeroProbability,

    #[error("degenerate region: rejection acceptance rate {0:e} after {1} proposals")]
    DegenerateRegion(f64, usize),

    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),

    #[error("every observation set has zero likelihood at all {0} tried initializations")]
    InfeasibleStart(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
