//! Operating characteristics of a set of simulated trials.

use serde::{Deserialize, Serialize};

use crate::engine::{Scenario, TrialRecord};
use crate::error::{Error, Result};

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    fn proportion(hits: usize, n: usize) -> Option<Self> {
        (n > 0).then(|| {
            let p = hits as f64 / n as f64;
            Estimate {
                value: p,
                se: (p * (1.0 - p) / n as f64).sqrt(),
            }
        })
    }

    fn mean(values: impl Iterator<Item = f64> + Clone) -> Self {
        let (mut n, mut sum) = (0usize, 0.0);
        for v in values.clone() {
            n += 1;
            sum += v;
        }
        let mean = sum / n as f64;
        let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
        let se = if n > 1 { (ss / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        Estimate { value: mean, se }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Absent when no trial rejected.
    pub pfdr: Option<Estimate>,
    pub fdr: f64,
    /// Absent when no trial had H₀ true.
    pub type1_a: Option<Estimate>,
    pub type1_b: Option<Estimate>,
    /// Absent when every trial had H₀ true.
    pub power: Option<Estimate>,
    pub bias: Estimate,
    pub mse: Estimate,
    pub coverage_one_sided: Estimate,
    pub coverage_symmetric: Estimate,
    /// Mean patients enrolled, both arms counted.
    pub mean_sample_size: Estimate,
    /// Mean patients enrolled per arm.
    pub mean_sample_size_per_arm: f64,
    pub n_reject: usize,
    pub n_h0: usize,
    pub n_h1: usize,
    pub n_replicates: usize,
    /// Records whose reported posterior mean is a location without a mean.
    pub n_mean_undefined: usize,
}

pub fn compute_metrics(records: &[TrialRecord], scenario: &Scenario) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(Error::InsufficientRecords("metrics need at least one record".into()));
    }
    let n = records.len();
    let n_reject = records.iter().filter(|r| r.rejected).count();
    let n_h0 = records.iter().filter(|r| r.h0_true).count();
    let false_reject = records.iter().filter(|r| r.rejected && r.h0_true).count();
    let true_reject = n_reject - false_reject;
    let pfdr = Estimate::proportion(false_reject, n_reject);
    let h0_covered = records
        .iter()
        .filter(|r| r.h0_true && r.summary.ci_one_sided.contains(r.true_value))
        .count();
    let type1_b = Estimate::proportion(n_h0 - h0_covered, n_h0);

    let err = records.iter().map(|r| r.summary.post_mean - r.true_value);
    let covered = |f: fn(&TrialRecord) -> bool| Estimate::proportion(records.iter().filter(|r| f(r)).count(), n).expect("n > 0");
    let mean_n = Estimate::mean(records.iter().map(|r| f64::from(r.final_n)));
    let arms = if scenario.is_rct() { 2.0 } else { 1.0 };
    Ok(MetricsReport {
        fdr: pfdr.map_or(0.0, |p| p.value * n_reject as f64 / n as f64),
        pfdr,
        type1_a: Estimate::proportion(false_reject, n_h0),
        type1_b,
        power: Estimate::proportion(true_reject, n - n_h0),
        bias: Estimate::mean(err.clone()),
        mse: Estimate::mean(err.map(|e| e * e)),
        coverage_one_sided: covered(|r| r.summary.ci_one_sided.contains(r.true_value)),
        coverage_symmetric: covered(|r| r.summary.ci_symmetric.contains(r.true_value)),
        mean_sample_size_per_arm: mean_n.value / arms,
        mean_sample_size: mean_n,
        n_reject,
        n_h0,
        n_h1: n - n_h0,
        n_replicates: n,
        n_mean_undefined: records.iter().filter(|r| !r.summary.mean_defined).count(),
    })
}

/// Outcome of comparing a design with interims to its fixed counterpart.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InflationVerdict {
    /// Both Type I error A and pFDR rose by more than the slack.
    Inflated,
    /// Neither fell by more than the slack, but not both rose beyond it.
    NotInflated,
    /// At least one fell by more than the slack.
    Contradicted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationCheck {
    pub type1_a_fixed: f64,
    pub type1_a_adaptive: f64,
    pub pfdr_fixed: f64,
    pub pfdr_adaptive: f64,
    /// Three pooled standard errors.
    pub type1_slack: f64,
    pub pfdr_slack: f64,
    pub verdict: InflationVerdict,
}

impl InflationCheck {
    pub fn passes(&self) -> bool {
        self.verdict == InflationVerdict::Inflated
    }
}

/// Compares paired fixed and adaptive reports with a slack of three pooled
/// standard errors on each difference.
pub fn fdr_inflation_check(fixed: &MetricsReport, adaptive: &MetricsReport) -> Result<InflationCheck> {
    let need = |e: Option<Estimate>, what: &str| {
        e.ok_or_else(|| Error::InsufficientRecords(format!("{what} is undefined for one of the reports")))
    };
    let (tf, ta) = (need(fixed.type1_a, "Type I error A")?, need(adaptive.type1_a, "Type I error A")?);
    let (pf, pa) = (need(fixed.pfdr, "pFDR")?, need(adaptive.pfdr, "pFDR")?);
    let pooled = |a: Estimate, b: Estimate| 3.0 * (a.se * a.se + b.se * b.se).sqrt();
    let (type1_slack, pfdr_slack) = (pooled(tf, ta), pooled(pf, pa));
    let d_type1 = ta.value - tf.value;
    let d_pfdr = pa.value - pf.value;
    let verdict = if d_type1 < -type1_slack || d_pfdr < -pfdr_slack {
        InflationVerdict::Contradicted
    } else if d_type1 > type1_slack && d_pfdr > pfdr_slack {
        InflationVerdict::Inflated
    } else {
        InflationVerdict::NotInflated
    };
    Ok(InflationCheck {
        type1_a_fixed: tf.value,
        type1_a_adaptive: ta.value,
        pfdr_fixed: pf.value,
        pfdr_adaptive: pa.value,
        type1_slack,
        pfdr_slack,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::{BetaPrior, PosteriorSummary};
    use crate::engine::{ArmPrior, Design, Endpoint, Truth};
    use crate::mcmc::McmcConfig;
    use crate::specfun::Interval;

    fn scenario() -> Scenario {
        Scenario {
            endpoint: Endpoint::Binary,
            design: Design::SingleArm,
            n_max: 100,
            interim_schedule: vec![],
            theta0: 0.6,
            delta: 0.0,
            rho: 1.0,
            generating_prior: ArmPrior::Beta(BetaPrior { alpha: 3.0, beta: 3.0 }),
            user_prior: ArmPrior::Beta(BetaPrior { alpha: 3.0, beta: 3.0 }),
            control_generating_prior: None,
            control_user_prior: None,
            cutoff: 0.689,
            n_replicates: 4,
            seed: 0,
            accrual_rate: 6.0,
            followup_months: 12.0,
            mcmc: McmcConfig::default(),
        }
    }

    fn record(h0: bool, rejected: bool, truth: f64, mean: f64) -> TrialRecord {
        TrialRecord {
            replicate: 0,
            truth: Truth {
                theta: truth,
                sigma_sq: None,
                kappa: None,
                beta: None,
                control_theta: None,
                control_sigma_sq: None,
            },
            true_value: truth,
            h0_true: h0,
            rejected,
            stop_analysis_index: 0,
            stopped_early: false,
            final_n: 100,
            summary: PosteriorSummary {
                prob_superior: 0.5,
                post_mean: mean,
                ci_one_sided: Interval::lower_bounded(0.0),
                ci_symmetric: Interval::new(0.0, 1.0),
                mean_defined: true,
            },
        }
    }

    #[test]
    fn hand_built_counts() {
        let recs = vec![
            record(true, true, 0.5, 0.5),
            record(true, false, 0.5, 0.5),
            record(false, true, 0.7, 0.7),
            record(false, true, 0.7, 0.7),
        ];
        let m = compute_metrics(&recs, &scenario()).unwrap();
        assert!((m.pfdr.unwrap().value - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.fdr - 0.25).abs() < 1e-15);
        assert_eq!(m.type1_a.unwrap().value, 0.5);
        assert_eq!(m.power.unwrap().value, 1.0);
        assert_eq!(m.coverage_symmetric.value, 1.0);
        assert_eq!(m.type1_b.unwrap().value, 0.0);
        assert_eq!(m.bias.value, 0.0);
        assert_eq!((m.n_h0, m.n_h1, m.n_reject), (2, 2, 3));
    }

    #[test]
    fn no_rejections_leaves_pfdr_absent() {
        let recs = vec![record(true, false, 0.5, 0.4), record(false, false, 0.7, 0.8)];
        let m = compute_metrics(&recs, &scenario()).unwrap();
        assert!(m.pfdr.is_none());
        assert_eq!(m.fdr, 0.0);
        assert!((m.bias.value).abs() < 1e-15);
        assert!((m.mse.value - 0.01).abs() < 1e-12);
        assert!(compute_metrics(&[], &scenario()).is_err());
    }

    #[test]
    fn identical_reports_are_not_inflated() {
        let recs = vec![
            record(true, true, 0.5, 0.5),
            record(true, false, 0.5, 0.5),
            record(false, true, 0.7, 0.7),
        ];
        let m = compute_metrics(&recs, &scenario()).unwrap();
        let c = fdr_inflation_check(&m, &m).unwrap();
        assert_eq!(c.verdict, InflationVerdict::NotInflated);
        assert!(!c.passes());
    }
}
