//! Bayesian MCMC engine and benchmark harness.
//!
//! Three sampler backends (random-walk Metropolis-Hastings, Gibbs with slice
//! fallback, NUTS) run on a zoo of regression, mixture and survival models,
//! with synthetic data generators and the usual chain diagnostics.

pub mod datagen;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod model;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
