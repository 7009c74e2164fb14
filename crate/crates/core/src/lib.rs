//! Globalized proximal Newton method for composite problems `min f + g`
//! posed in a discretized Hilbert space.

pub mod baselines;
pub mod error;
pub mod hilbert;
pub mod objective;
pub mod problems;
pub mod proxnewton;
pub mod subsolver;

pub use error::{Error, Result};
