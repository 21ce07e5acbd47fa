//! Sequential M-ary hypothesis testing when an adversary perturbs the
//! samples through a channel constrained to a distortion ball.
//!
//! [`equilibrium`] solves for the worst-case perturbations and the error
//! exponents they leave, [`seqtest`] implements the sequential tests, and
//! [`sim`] replicates them under a chosen adversary.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod divopt;
pub mod equilibrium;
pub mod error;
pub mod prob;
pub mod seqtest;
pub mod sim;
