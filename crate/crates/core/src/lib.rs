//! Annealed adversarial training: a generator learns the uniform
//! distribution on a box, then follows the Gaussian-smoothed empirical
//! distribution as its inverse temperature rises along a geometric schedule.

pub mod autodiff;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod nn;
pub mod schedule;
pub mod synth;
pub mod target;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
