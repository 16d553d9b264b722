//! Desk-scale laboratory for offline and offline-to-online reinforcement
//! learning with reward scaling, layer-normalized critics, and penalties on
//! infeasible actions.
//!
//! The crate is organized around a from-scratch f64 network core ([`nn`]),
//! dataset and replay machinery ([`data`]), deterministic toy environments
//! ([`envs`]), the trainer itself ([`pars`]), measurement instruments
//! ([`diagnostics`]), regression studies on cone-shaped targets
//! ([`didactic`]), and a finite-MDP certification of the underlying backup
//! operator ([`tabular`]). Everything is deterministic given a seed; see
//! [`rng`] for how one run seed fans out into independent streams.

pub mod config;
pub mod data;
pub mod diagnostics;
pub mod didactic;
pub mod envs;
pub mod error;
pub mod nn;
pub mod pars;
pub mod report;
pub mod rng;
pub mod tabular;

pub use error::{Error, Result};
