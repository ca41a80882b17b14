//! Back-pressure approximation for multiple unicast sessions with pairwise
//! XOR network coding, on wired graphs and wireless hypergraphs.
//!
//! The usual entry point is [`engine::run`]: it simulates rounds of the
//! algorithm on a [`ProblemInstance`] and returns round-averaged
//! [`SolutionVariables`], which [`solution::verify`] checks against the
//! flow constraint system.

// Validation is written as `!(x > 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod netmodel;
pub mod oracle;
pub mod queues;
pub mod solution;
pub mod transfers;

pub use engine::{run, Engine, RoundConfig, RoundStats, RunOutcome};
pub use error::{Error, Result};
pub use netmodel::{derive_constants, parse_instance, ConstantParams, DerivedConstants, Mode, ProblemInstance};
pub use solution::{verify, SolutionVariables, VerificationReport};
