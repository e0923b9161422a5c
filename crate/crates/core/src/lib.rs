//! Planning toolkit for limiting subsynchronous power fluctuations of large
//! loads (AI data centers) so that turbine-generator shafts keep their
//! fatigue life.
//!
//! The pipeline has three stages:
//!
//! 1. [`limits`]: per-generator allowable electrical power variation, from a
//!    lumped multi-mass shaft model ([`shaft`]) and the Goodman envelope
//!    ([`fatigue`]).
//! 2. [`interaction`]: load-flow based algebraic interaction factors that map
//!    a load change at a bus to each generator's power change.
//! 3. [`planner`]: site screening, the iterative LP for per-site fluctuation
//!    limits, and FFT compliance checks.
//!
//! [`validator`] closes the loop with nonlinear time-domain simulation,
//! Rainflow counting and Miner damage.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fatigue;
pub mod interaction;
pub mod limits;
pub mod model;
pub mod planner;
pub mod report;
pub mod shaft;
pub mod study;
pub mod validator;

pub use error::{Error, Result};
