use std::fmt;

use thiserror::Error;

/// Axis-aligned rectangle in the complex frequency plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.17e}, {:.17e}] x [{:.17e}, {:.17e}]", self.re_min, self.re_max, self.im_min, self.im_max)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("pole: {0}")]
    Pole(String),
    #[error("contour failure on box {rect} (mode {ell}): {reason}")]
    ContourFailure { rect: Rect, ell: u32, reason: String },
    #[error("mode budget exceeded: needed more than {budget} modes")]
    Budget { budget: u32 },
    #[error("radius {radius} exceeds certified completeness radius {complete_below}")]
    Completeness { radius: f64, complete_below: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("singularity: {0}")]
    Singular(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("range error: log-determinant {log_value} does not fit in f64")]
    Range { log_value: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(z: num_complex::Complex64, what: &str) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{what} is not finite: {z}")))
    }
}
