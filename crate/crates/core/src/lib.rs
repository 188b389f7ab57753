//! Multi-gait selection and transition toolkit for quadruped robots.
//!
//! Gaits are described by a duty factor and per-leg lift-off offsets
//! ([`gait`]); a finite-state machine interpolates between them in motion
//! ([`transition`]). A single-rigid-body simulator ([`sim`]) produces stride
//! logs that [`metrics`] turns into cost of transport and a stability index.
//! [`mapping`] sweeps speeds and gaits into a velocity-gait map, and
//! [`strategy`] drives the full selection strategy over composite terrain.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod gait;
pub mod manifest;
pub mod mapping;
pub mod metrics;
pub mod qp;
pub mod robot;
pub mod sim;
pub mod strategy;
pub mod transition;

pub use error::{Error, Result};
pub use gait::{GaitName, GaitPattern, LegId};
