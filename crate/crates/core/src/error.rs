use alloc::string::String;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// An elementary function was evaluated outside its domain.
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// A Jacobian or metric was (numerically) singular at the evaluation point.
    #[error("singular {what} at {at}: |det| = {det:e}")]
    Singular { what: &'static str, at: String, det: f64 },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("target averages are not attainable at finite multipliers: {0}")]
    InfeasibleTarget(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn fmt_point(x: &[f64]) -> String {
    use core::fmt::Write;
    let mut s = String::from("[");
    for (i, v) in x.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{v}");
    }
    s.push(']');
    s
}
