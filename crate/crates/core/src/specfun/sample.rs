//! Random-variate generators for the laws used by the data generators and
//! the survival samplers.

use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use super::{RngStream, SpecError};

fn require_positive(name: &str, value: f64) -> Result<(), SpecError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(SpecError::Domain(format!("{name} must be positive and finite, got {value}")))
    }
}

pub fn sample_standard_normal(rng: &mut RngStream) -> f64 {
    StandardNormal.sample(rng.inner_mut())
}

/// N(mean, variance).
pub fn sample_normal(rng: &mut RngStream, mean: f64, variance: f64) -> Result<f64, SpecError> {
    if !(variance >= 0.0) || !variance.is_finite() || !mean.is_finite() {
        return Err(SpecError::Domain(format!(
            "normal requires finite mean and nonnegative variance, got ({mean}, {variance})"
        )));
    }
    Ok(mean + variance.sqrt() * sample_standard_normal(rng))
}

/// Gamma with the given shape and rate (mean shape / rate).
pub fn sample_gamma(rng: &mut RngStream, shape: f64, rate: f64) -> Result<f64, SpecError> {
    require_positive("gamma shape", shape)?;
    require_positive("gamma rate", rate)?;
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| SpecError::Domain(e.to_string()))?;
    Ok(dist.sample(rng.inner_mut()))
}

pub fn sample_beta(rng: &mut RngStream, a: f64, b: f64) -> Result<f64, SpecError> {
    require_positive("beta a", a)?;
    require_positive("beta b", b)?;
    let dist = Beta::new(a, b).map_err(|e| SpecError::Domain(e.to_string()))?;
    Ok(dist.sample(rng.inner_mut()))
}

/// Scaled inverse chi-squared Inv-χ²(ν, s²): ν s² / χ²_ν.
pub fn sample_inv_chi2(rng: &mut RngStream, dof: f64, scale_sq: f64) -> Result<f64, SpecError> {
    require_positive("inverse chi-squared dof", dof)?;
    require_positive("inverse chi-squared scale", scale_sq)?;
    let chi2 = sample_gamma(rng, 0.5 * dof, 0.5)?;
    Ok(dof * scale_sq / chi2)
}

/// Weibull parameterized by median `theta` and shape `kappa`, drawn by
/// inverting S(x) = exp(-ln2 (x/θ)^κ).
pub fn sample_weibull_median(rng: &mut RngStream, theta: f64, kappa: f64) -> Result<f64, SpecError> {
    require_positive("weibull median", theta)?;
    require_positive("weibull shape", kappa)?;
    let u = rng.uniform_open();
    Ok(theta * (-u.ln() / std::f64::consts::LN_2).powf(1.0 / kappa))
}

/// Exponential with the given rate.
pub fn sample_exponential(rng: &mut RngStream, rate: f64) -> Result<f64, SpecError> {
    require_positive("exponential rate", rate)?;
    Ok(-rng.uniform_open().ln() / rate)
}
