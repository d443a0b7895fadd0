//! Discrete random-walk economies with an insider who knows a signal about
//! the future at time zero.
//!
//! The crate builds scaled walk lattices, computes the conditional density of
//! a signal given the public information, calibrates the exponential
//! martingale measure, and solves the public and insider utility problems by
//! convex duality. Continuous-time reference values and a Monte Carlo delta
//! hedge round out the convergence experiments driven by [`harness`].

pub mod error;
pub mod harness;
pub mod limits;
pub mod measures;
pub mod numeric;
pub mod optimize;
pub mod replicate;
pub mod signals;
pub mod utility;
pub mod walks;

pub use error::{LabError, Result};
