use thiserror::Error;

/// Errors raised by the spline, assembly and time-stepping layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spline space: {0}")]
    InvalidSpace(String),

    #[error("derivative order {order} unsupported for splines of order {spline_order}")]
    DerivativeOrder { order: usize, spline_order: usize },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is numerically singular (pivot {pivot:.3e} at index {index})")]
    Singular { pivot: f64, index: usize },

    #[error("depth {value:.6e} below floor {floor:.6e} at x = {x:.6}, t = {t:.6}")]
    PositivityViolation {
        t: f64,
        x: f64,
        value: f64,
        floor: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
