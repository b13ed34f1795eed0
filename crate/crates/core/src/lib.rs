//! Log-linear cognitive diagnosis models (LCDM) and one-sided score-test
//! modification indices for detecting under-specified Q-matrices and
//! diagnostic models.

pub mod error;
pub mod estimation;
pub mod io;
pub mod mi;
pub mod model;
pub mod score;
pub mod sim;

pub use error::{DcmError, Result};
