//! Special functions, distribution functions, and reproducible random-variate
//! generation shared by every posterior computation and data generator.

mod ks;
mod rng;
mod sample;
mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ks::{ks_pvalue, ks_statistic, ks_test, KsOutcome};
pub use rng::RngStream;
pub use sample::{
    sample_beta, sample_exponential, sample_gamma, sample_inv_chi2, sample_normal,
    sample_standard_normal, sample_weibull_median,
};
pub use special::{
    beta_ln_pdf, beta_quantile, gamma_cdf, invert_cdf, ln_beta, ln_gamma, normal_cdf,
    normal_pdf, normal_quantile, reg_inc_beta, reg_inc_gamma, student_t_cdf, student_t_ln_pdf,
    student_t_quantile,
};
pub(crate) use special::{inc_beta_unchecked, t_cdf_unchecked};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("argument error: {0}")]
    Domain(String),
}

/// Interval with possibly infinite endpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower <= upper, "interval bounds out of order: {lower} > {upper}");
        Self { lower, upper }
    }

    pub fn lower_bounded(lower: f64) -> Self {
        Self::new(lower, f64::INFINITY)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}
