//! Energy-aware task scheduling on a simulated asymmetric multicore with
//! joint CPU and memory DVFS.
//!
//! The crate is organised bottom-up: [`platform`] holds the machine and its
//! hidden ground truth, [`dag`] the task graphs, [`mpr`] and [`models`] the
//! learned predictors, [`search`] the configuration search, [`sim`] the
//! discrete-event engine and [`sched`]/[`baselines`] the scheduling policies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod dag;
pub mod error;
pub mod models;
pub mod mpr;
pub mod platform;
pub mod sched;
pub mod search;
pub mod sim;
pub mod workload;

pub use error::{Error, Result};
