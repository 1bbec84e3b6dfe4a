//! Simulation of a passive reconfigurable intelligent surface (RIS) used as
//! an over-the-air channel equalizer.
//!
//! The crate contains a frequency-selective channel simulator, an episodic
//! environment, a steepest-descent RIS equalizer with baselines, a small
//! neural-network engine, three actor-critic agents and an experiment harness.

pub mod agents;
pub mod arise;
pub mod channel;
pub mod env;
pub mod error;
pub mod experiments;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
