//! Empirical-prior Bayesian inference for the sparse normal means model
//! `Y_i ~ N(theta_i, sigma2)`.
//!
//! The posterior over configurations (which means are non-zero) is available
//! in closed form up to normalization. This crate computes it exactly by
//! enumeration for small `n`, samples it by Metropolis–Hastings or Gibbs for
//! large `n`, turns either representation into inclusion probabilities and
//! credible intervals for linear functionals, and runs Monte Carlo studies of
//! the intervals' frequentist coverage.

pub mod error;
pub mod experiments;
pub mod inference;
pub mod math;
pub mod mixture;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod samplers;
pub mod theory;

pub use error::{Error, Result};
pub use model::{Configuration, DataVector, ModelConfig, SizePrior};
