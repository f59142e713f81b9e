pub mod birman;
pub mod checks;
pub mod contour;
pub mod error;
pub mod growth;
pub mod quadrature;
pub mod resonance;
pub mod specfun;

pub use error::{Error, Rect, Result};
