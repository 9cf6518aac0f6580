//! Multiuser uplink with a movable-antenna receiver.
//!
//! The crate jointly chooses antenna positions, receive combiners and user
//! transmit powers to maximize the minimum user rate. Antenna positions are
//! searched by a particle swarm; for each candidate layout an alternating
//! loop updates MMSE combiners and max-min powers. Fixed-array, discrete
//! grid and zero-forcing baselines plus a Monte Carlo harness are included.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod inner_loop;
pub mod numerics;
pub mod power;
pub mod pso;
pub mod receiver;

pub use error::{Error, Result};
