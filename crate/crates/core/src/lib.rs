//! Monte Carlo simulation of Bayesian adaptive clinical trial designs.
//!
//! Trials are simulated by drawing the true effect from a data-generating
//! prior, generating patient data, and applying a posterior-probability
//! superiority stopping rule at each interim and final analysis under a
//! user-specified prior. Aggregating many replicates yields the operating
//! characteristics (pFDR, FDR, Type I error, power, bias, MSE, credible
//! interval coverage and mean sample size) of the fixed and adaptive
//! versions of a design.

pub mod calibrate;
pub mod conjugate;
pub mod engine;
pub mod error;
pub mod mcmc;
pub mod metrics;
pub mod specfun;

pub use error::{Error, Result};
