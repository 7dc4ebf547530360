//! Exact and approximate permanents of 0/1 matrices.
//!
//! The exact side provides a permutation-sum oracle and Ryser's
//! inclusion-exclusion formula with Gray-code column updates. The approximate
//! side is the annealed Markov chain Monte Carlo scheme over perfect and
//! near-perfect matchings, driven by closed-form sampling parameters that can
//! be relaxed by fixed divisors. [`feasibility`] compares the analytic step
//! budget against Ryser's operation count, and [`harness`] runs batches of
//! trials against exact ground truth.

pub mod chain;
pub mod error;
pub mod exact;
pub mod feasibility;
pub mod fpras;
pub mod harness;
pub mod matrix;
pub mod params;
pub mod rng;
mod serde_big;

pub use error::{Error, Result};
pub use matrix::{Matching, MatchingKind, Matrix};

/// Version tag written into every JSON document this crate produces.
pub const SCHEMA_VERSION: u32 = 1;
