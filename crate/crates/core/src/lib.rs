//! Simulation and ergodicity certification for time-periodic McKean–Vlasov
//! SDEs, optionally reflected on convex domains.

pub mod coefficients;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod rates;
pub mod transport;

pub use error::{Error, Result};
