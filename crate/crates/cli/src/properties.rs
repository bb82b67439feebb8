//! Executable invariant suites. Each check is one JSON line with the measured
//! value, its bound and a pass flag.

use serde::Serialize;

use interimsim::calibrate::calibration_scenario;
use interimsim::engine::{run_scenario_paired, ArmPrior, RunOptions, Scenario};
use interimsim::mcmc::{geweke_test, GewekeConfig};
use interimsim::metrics::{compute_metrics, fdr_inflation_check, MetricsReport};
use interimsim::specfun::RngStream;
use interimsim::Error;

use crate::presets::load_preset;

pub const SUITES: [&str; 5] = ["martingale", "coverage", "fdr-inflation", "mse-inflation", "mcmc-geweke"];

/// Matched-prior cases: one per endpoint and design.
pub const CASE_PRESETS: [(&str, &str); 8] = [
    ("binary/single_arm", "table2"),
    ("normal_known_var/single_arm", "table3"),
    ("normal_unknown_var/single_arm", "table4"),
    ("survival/single_arm", "table5"),
    ("binary/rct", "table_s3"),
    ("normal_known_var/rct", "table_s4"),
    ("normal_unknown_var/rct", "table_s5"),
    ("survival/rct", "table_s6"),
];

pub const COVERAGE_TOLERANCE: f64 = 0.005;
pub const BIAS_SE_MULTIPLE: f64 = 3.0;
pub const GEWEKE_ALPHA: f64 = 0.001;

#[derive(Clone, Copy, Debug)]
pub struct Scale {
    /// Replicates for closed-form endpoints.
    pub closed_form: u64,
    /// Replicates for survival endpoints.
    pub survival: u64,
    /// Recorded states per Geweke run.
    pub geweke_records: usize,
    /// Overrides the preset seeds when set.
    pub seed: Option<u64>,
}

impl Default for Scale {
    fn default() -> Self {
        Self {
            closed_form: 50_000,
            survival: 10_000,
            geweke_records: 2_000,
            seed: None,
        }
    }
}

impl Scale {
    /// One replicate count for every endpoint.
    pub fn uniform(replicates: u64, seed: Option<u64>) -> Self {
        Self {
            closed_form: replicates,
            survival: replicates,
            geweke_records: replicates as usize,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub case: String,
    /// "fixed", "adaptive", "paired" or "sampler".
    pub design: &'static str,
    pub metric: &'static str,
    pub value: f64,
    /// Comparison target: the nominal value, the other design, or α.
    pub reference: f64,
    /// Allowed deviation, or the MC standard error used to build it.
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checks always serialize")
    }
}

/// Matched fixed and adaptive reports of one case.
#[derive(Clone, Debug)]
pub struct CaseRun {
    pub case: String,
    pub scenario: Scenario,
    pub fixed: MetricsReport,
    pub adaptive: MetricsReport,
}

/// The preset's matched row with the control user prior also matched when
/// the families agree, interims kept.
pub fn matched_case(preset: &str, scale: &Scale) -> Result<Scenario, String> {
    let file = load_preset(preset).map_err(|e| e.to_string())?;
    let idx = file.matched_variant().ok_or_else(|| format!("preset '{preset}' has no matched row"))?;
    let mut s = file.scenario(idx, true);
    let schedule = s.interim_schedule.clone();
    s = calibration_scenario(&s);
    s.interim_schedule = schedule;
    s.n_replicates = if matches!(s.generating_prior, ArmPrior::Survival(_)) { scale.survival } else { scale.closed_form };
    if let Some(seed) = scale.seed {
        s.seed = seed;
    }
    Ok(s)
}

pub fn run_case(case: &str, scenario: &Scenario, threads: Option<usize>) -> Result<CaseRun, Error> {
    let run = run_scenario_paired(scenario, RunOptions { threads, progress: None })?;
    Ok(CaseRun {
        case: case.to_string(),
        scenario: scenario.clone(),
        fixed: compute_metrics(&run.fixed, &scenario.without_interims())?,
        adaptive: compute_metrics(&run.adaptive, scenario)?,
    })
}

pub fn run_cases(scale: &Scale, threads: Option<usize>, mut on_case: impl FnMut(&str)) -> Result<Vec<CaseRun>, String> {
    CASE_PRESETS
        .iter()
        .map(|(case, preset)| {
            on_case(case);
            let s = matched_case(preset, scale)?;
            run_case(case, &s, threads).map_err(|e| format!("{case}: {e}"))
        })
        .collect()
}

fn designs(run: &CaseRun) -> [(&'static str, &MetricsReport); 2] {
    [("fixed", &run.fixed), ("adaptive", &run.adaptive)]
}

/// |bias| below three MC standard errors.
pub fn martingale(runs: &[CaseRun]) -> Vec<Check> {
    runs.iter()
        .flat_map(|r| {
            designs(r).map(|(design, m)| Check {
                suite: "martingale",
                case: r.case.clone(),
                design,
                metric: "bias",
                value: m.bias.value,
                reference: 0.0,
                tolerance: BIAS_SE_MULTIPLE * m.bias.se,
                pass: m.bias.value.abs() < BIAS_SE_MULTIPLE * m.bias.se,
            })
        })
        .collect()
}

/// One-sided and symmetric coverage within 0.005 of 0.95.
pub fn coverage(runs: &[CaseRun]) -> Vec<Check> {
    let mut out = Vec::new();
    for r in runs {
        for (design, m) in designs(r) {
            for (metric, v) in [("coverage_one_sided", m.coverage_one_sided.value), ("coverage_symmetric", m.coverage_symmetric.value)] {
                out.push(Check {
                    suite: "coverage",
                    case: r.case.clone(),
                    design,
                    metric,
                    value: v,
                    reference: 0.95,
                    tolerance: COVERAGE_TOLERANCE,
                    pass: (v - 0.95).abs() <= COVERAGE_TOLERANCE,
                });
            }
        }
    }
    out
}

/// Type I error A and pFDR both rise beyond three pooled SEs.
pub fn fdr_inflation(runs: &[CaseRun]) -> Vec<Check> {
    let mut out = Vec::new();
    for r in runs {
        match fdr_inflation_check(&r.fixed, &r.adaptive) {
            Ok(c) => {
                for (metric, fixed, adaptive, slack) in [
                    ("type1_a", c.type1_a_fixed, c.type1_a_adaptive, c.type1_slack),
                    ("pfdr", c.pfdr_fixed, c.pfdr_adaptive, c.pfdr_slack),
                ] {
                    out.push(Check {
                        suite: "fdr-inflation",
                        case: r.case.clone(),
                        design: "paired",
                        metric,
                        value: adaptive,
                        reference: fixed,
                        tolerance: slack,
                        pass: c.passes(),
                    });
                }
            }
            Err(_) => out.push(Check {
                suite: "fdr-inflation",
                case: r.case.clone(),
                design: "paired",
                metric: "pfdr",
                value: f64::NAN,
                reference: f64::NAN,
                tolerance: f64::NAN,
                pass: false,
            }),
        }
    }
    out
}

/// MSE with interims at least the fixed-design MSE.
pub fn mse_inflation(runs: &[CaseRun]) -> Vec<Check> {
    runs.iter()
        .map(|r| Check {
            suite: "mse-inflation",
            case: r.case.clone(),
            design: "paired",
            metric: "mse",
            value: r.adaptive.mse.value,
            reference: r.fixed.mse.value,
            tolerance: 0.0,
            pass: r.adaptive.mse.value >= r.fixed.mse.value,
        })
        .collect()
}

/// KS p-values of the successive-conditional sampler against the prior, for
/// the single-arm and two-arm survival priors.
pub fn mcmc_geweke(scale: &Scale) -> Result<Vec<Check>, String> {
    let mut out = Vec::new();
    for (case, preset, rct) in [("survival/single_arm", "table5", false), ("survival/rct", "table_s6", true)] {
        let file = load_preset(preset).map_err(|e| e.to_string())?;
        let ArmPrior::Survival(prior) = file.generating_prior else {
            return Err(format!("preset '{preset}' is not a survival scenario"));
        };
        let config = GewekeConfig {
            records: scale.geweke_records,
            rct,
            ..GewekeConfig::default()
        };
        let mut rng = RngStream::new(scale.seed.unwrap_or(file.seed), 0);
        let outcome = geweke_test(&prior, &config, &mut rng).map_err(|e| format!("{case}: {e}"))?;
        let tests = [("theta", Some(outcome.theta)), ("kappa", Some(outcome.kappa)), ("beta", outcome.beta)];
        for (metric, ks) in tests {
            if let Some(ks) = ks {
                out.push(Check {
                    suite: "mcmc-geweke",
                    case: case.to_string(),
                    design: "sampler",
                    metric,
                    value: ks.p_value,
                    reference: GEWEKE_ALPHA,
                    tolerance: 0.0,
                    pass: ks.p_value >= GEWEKE_ALPHA,
                });
            }
        }
    }
    Ok(out)
}

pub fn evaluate(suite: &str, runs: &[CaseRun]) -> Option<Vec<Check>> {
    Some(match suite {
        "martingale" => martingale(runs),
        "coverage" => coverage(runs),
        "fdr-inflation" => fdr_inflation(runs),
        "mse-inflation" => mse_inflation(runs),
        _ => return None,
    })
}
