//! Cutoff calibration for the fixed design.
//!
//! One simulation pass stores each replicate's final-analysis Pr(H_a | D)
//! under the matched prior; every candidate cutoff is then evaluated on those
//! stored probabilities, so rejection sets are nested across the grid.

use serde::{Deserialize, Serialize};

use crate::engine::{run_scenario, ArmPrior, RunOptions, Scenario};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub scenario: Scenario,
    pub target_pfdr: f64,
    pub grid_step: f64,
}

impl CalibrationSpec {
    /// Grid step 0.001, or 0.002 when posterior probabilities come from MCMC.
    pub fn new(scenario: Scenario, target_pfdr: f64) -> Self {
        let grid_step = if matches!(scenario.user_prior, ArmPrior::Survival(_)) { 0.002 } else { 0.001 };
        Self {
            scenario,
            target_pfdr,
            grid_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_pfdr > 0.0 && self.target_pfdr < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "target pFDR must lie in (0, 1), got {}",
                self.target_pfdr
            )));
        }
        if !(self.grid_step > 0.0 && self.grid_step < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "grid step must lie in (0, 0.5), got {}",
                self.grid_step
            )));
        }
        Ok(())
    }
}

/// The scenario actually simulated: no interims and the treatment-arm user
/// prior replaced by the data-generating prior. For two-arm trials the
/// control user prior is replaced too when it has the generating family.
pub fn calibration_scenario(base: &Scenario) -> Scenario {
    let mut s = base.without_interims();
    let compatible = |g: &ArmPrior, u: &ArmPrior| std::mem::discriminant(g) == std::mem::discriminant(u);
    if compatible(&s.generating_prior, &s.user_prior) {
        s.user_prior = s.generating_prior;
    }
    if let (Some(g), Some(u)) = (s.control_generating_prior, s.control_user_prior) {
        if compatible(&g, &u) {
            s.control_user_prior = Some(g);
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cutoff: f64,
    pub pfdr: Option<f64>,
    pub n_reject: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub cutoff: f64,
    pub achieved_pfdr: f64,
    /// Binomial standard error of the pFDR at the target level.
    pub pfdr_se: f64,
    pub n_reject: usize,
    /// Grid cutoffs whose pFDR lies within two standard errors of the target.
    pub band: (f64, f64),
    pub grid_step: f64,
    pub n_replicates: usize,
}

/// Empirical pFDR at every grid cutoff, from descending cutoffs.
pub fn pfdr_curve(outcomes: &[(f64, bool)], grid_step: f64) -> Vec<CurvePoint> {
    let mut sorted: Vec<(f64, bool)> = outcomes.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let steps = (1.0 / grid_step).round() as usize;
    let mut points = Vec::with_capacity(steps);
    let (mut idx, mut rejected, mut false_rejected) = (0, 0usize, 0usize);
    for j in (1..steps).rev() {
        let cutoff = j as f64 / steps as f64;
        while idx < sorted.len() && sorted[idx].0 > cutoff {
            rejected += 1;
            false_rejected += usize::from(sorted[idx].1);
            idx += 1;
        }
        points.push(CurvePoint {
            cutoff,
            pfdr: (rejected > 0).then(|| false_rejected as f64 / rejected as f64),
            n_reject: rejected,
        });
    }
    points
}

/// Picks the cutoff whose pFDR is closest to the target without exceeding
/// it, preferring the smaller cutoff on ties. A cutoff is eligible only when
/// its rejection count can resolve the target (n_reject · target ≥ 1).
pub fn select_cutoff(curve: &[CurvePoint], target: f64, grid_step: f64, n_replicates: usize) -> Result<CalibrationResult> {
    let eligible = |p: &CurvePoint| p.pfdr.is_some_and(|v| v <= target) && p.n_reject as f64 * target >= 1.0;
    let best = curve
        .iter()
        .filter(|p| eligible(p))
        .min_by(|a, b| {
            let da = target - a.pfdr.unwrap();
            let db = target - b.pfdr.unwrap();
            da.total_cmp(&db).then(a.cutoff.total_cmp(&b.cutoff))
        })
        .ok_or_else(|| {
            Error::Calibration(format!(
                "no cutoff on a {grid_step} grid reaches pFDR <= {target} with enough rejections to resolve it"
            ))
        })?;
    let se = |n: usize| (target * (1.0 - target) / n as f64).sqrt();
    let within: Vec<f64> = curve
        .iter()
        .filter(|p| p.n_reject > 0 && p.pfdr.is_some_and(|v| (v - target).abs() <= 2.0 * se(p.n_reject)))
        .map(|p| p.cutoff)
        .collect();
    let band = if within.is_empty() {
        (best.cutoff, best.cutoff)
    } else {
        let lo = within.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = within.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo.min(best.cutoff), hi.max(best.cutoff))
    };
    Ok(CalibrationResult {
        cutoff: best.cutoff,
        achieved_pfdr: best.pfdr.unwrap(),
        pfdr_se: se(best.n_reject),
        n_reject: best.n_reject,
        band,
        grid_step,
        n_replicates,
    })
}

pub fn calibrate_cutoff(spec: &CalibrationSpec, options: RunOptions) -> Result<CalibrationResult> {
    spec.validate()?;
    let scenario = calibration_scenario(&spec.scenario);
    let records = run_scenario(&scenario, options)?;
    let outcomes: Vec<(f64, bool)> = records.iter().map(|r| (r.summary.prob_superior, r.h0_true)).collect();
    let curve = pfdr_curve(&outcomes, spec.grid_step);
    select_cutoff(&curve, spec.target_pfdr, spec.grid_step, records.len())
}
