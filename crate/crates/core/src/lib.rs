//! Partial-label learning toolkit built around clean samples.
//!
//! Instances carry a set of candidate labels, one of which is the true label.
//! Training combines two signals extracted from the clean (single-candidate)
//! instances:
//!
//! * a soft-target cross-entropy whose targets upweight the candidate picked
//!   by a k-nearest-neighbour vote ([`reweight`]), and
//! * a count loss asking the predicted number of instances per class to fall
//!   inside the interval implied by the candidate sets ([`count`]).
//!
//! [`trainer::fit`] runs the full loop on a small from-scratch MLP
//! ([`neural`]); [`stats`] holds the rank statistics used to compare methods.

pub mod check;
pub mod count;
pub mod data;
mod error;
pub mod knn;
pub mod matrix;
pub mod neural;
pub mod oracle;
pub mod reweight;
pub mod stats;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
