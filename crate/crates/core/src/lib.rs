//! Steady-state simulation of electrified roads with wireless dynamic
//! charging: AC power flow on a radial feeder with moving constant-power
//! vehicle loads, time-stepped voltage profiles, and voltage stability
//! limits traced by continuation.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod exec;
pub mod grid;
pub mod powerflow;
pub mod profile;
pub mod road;
pub mod stability;

pub use error::{Error, Result};
pub use exec::Execution;
