// SPDX-License-Identifier: Apache-2.0

//! Physics-informed neural network training with adaptive and stochastic
//! loss scaling, plus the reference solvers and experiment harness used to
//! benchmark it.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod config;
pub mod error;
pub mod harness;
pub mod jet;
pub mod loss;
pub mod network;
pub mod optim;
pub mod oracle;
pub mod problems;

pub use error::{PinnError, Result};
