use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FptError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("value overflows f64 for {what} (argument {arg}); supported range is {range}")]
    Overflow {
        what: &'static str,
        arg: f64,
        range: &'static str,
    },

    #[error("underflow: {0}")]
    Underflow(String),

    #[error("quadrature did not converge on [{a}, {b}]: estimate {value:e}, error {error:e}")]
    Quadrature {
        a: f64,
        b: f64,
        value: f64,
        error: f64,
    },

    #[error("no sign change found: {0}")]
    Bracket(String),

    #[error("positivity violated in h-series march at r = {r}, z = {z}: S = {value:e}")]
    Positivity { r: usize, z: f64, value: f64 },

    #[error("{0} is outside the tabulated range [{1}, {2}]")]
    OutOfRange(f64, f64, f64),

    #[error("no polynomial eigenvalue available: {0}")]
    NoPolynomialEigenvalue(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("finite-difference solver unstable at tau = {tau}: F = {value}")]
    Unstable { tau: f64, value: f64 },

    #[error("invalid field specification: {0}")]
    FieldSpec(String),
}

pub type Result<T> = std::result::Result<T, FptError>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(FptError::InvalidParameter(msg()))
    }
}
