use thiserror::Error;

/// Errors surfaced by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("resolution error: {msg} (need at least M = {min_points} points per axis)")]
    Resolution { msg: String, min_points: usize },
    #[error("window error: tail mass {tail:.3e} exceeds budget {budget:.1e}; use half-width >= {required:.3}")]
    Window { tail: f64, budget: f64, required: f64 },
    #[error("numerical error: {msg} after {iterations} iterations (last residual {residual:.3e})")]
    Numerical { msg: String, iterations: usize, residual: f64 },
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim_check(what: &str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Input(format!("{what}: dimension {a} does not match {b}")));
    }
    Ok(())
}
