//! Detection of a binary signal in Gaussian noise under bounded interference.
//!
//! The crate provides the observation model, Neyman-Pearson and random
//! distortion testing (RDT) decision rules, Monte Carlo evaluation of false
//! alarm and detection probabilities, empirical selectivity, a pairwise
//! comparison of tests, and a finite-preorder engine that checks the
//! sufficient condition for the multiplicity principle.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod numerics;
pub mod preorder;
pub mod rules;

pub use error::{Error, Result};
