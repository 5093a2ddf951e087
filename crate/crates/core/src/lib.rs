//! Exploration values for reinforcement learning: tabular and linear agents,
//! benchmark environments, a value-iteration oracle and an experiment harness.

pub mod agent;
pub mod approx;
pub mod env;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod oracle;
pub mod rng;
pub mod select;
pub mod tables;

pub use error::{Error, Result};
