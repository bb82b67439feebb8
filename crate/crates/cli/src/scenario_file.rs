//! TOML scenario files: one design, one data-generating prior and a list of
//! user-prior variants, each reported with and without interim looks.

use serde::{Deserialize, Serialize};

use interimsim::engine::{ArmPrior, Design, Endpoint, Scenario};
use interimsim::mcmc::McmcConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Output file stem.
    pub name: String,
    #[serde(default)]
    pub title: String,
    pub endpoint: Endpoint,
    #[serde(default = "default_design")]
    pub design: Design,
    /// Per arm for two-arm trials.
    pub n_max: u32,
    #[serde(default)]
    pub interim_schedule: Vec<u32>,
    #[serde(default)]
    pub theta0: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    pub cutoff: f64,
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_accrual")]
    pub accrual_rate: f64,
    #[serde(default = "default_followup")]
    pub followup_months: f64,
    #[serde(default = "yes")]
    pub without_interims: bool,
    #[serde(default = "yes")]
    pub with_interims: bool,
    #[serde(default)]
    pub mcmc: McmcConfig,
    pub generating_prior: ArmPrior,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlArm>,
    #[serde(rename = "variant")]
    pub variants: Vec<Variant>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlArm {
    pub generating_prior: ArmPrior,
    pub user_prior: ArmPrior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    /// Row label in the output table.
    pub label: String,
    pub user_prior: ArmPrior,
}

fn default_design() -> Design {
    Design::SingleArm
}
fn default_rho() -> f64 {
    1.0
}
fn default_accrual() -> f64 {
    6.0
}
fn default_followup() -> f64 {
    12.0
}
fn yes() -> bool {
    true
}

#[derive(Debug)]
pub struct ScenarioFileError(pub String);

impl std::fmt::Display for ScenarioFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ScenarioFileError {}

impl ScenarioFile {
    /// Parses and validates; errors carry the line and key from the parser.
    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioFileError(e.to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files always serialize")
    }

    pub fn validate(&self) -> Result<(), ScenarioFileError> {
        let err = |m: String| Err(ScenarioFileError(m));
        if self.replicates == 0 {
            return err("replicates must be at least 1".into());
        }
        if self.variants.is_empty() {
            return err("at least one [[variant]] is required".into());
        }
        if !self.with_interims && !self.without_interims {
            return err("with_interims and without_interims cannot both be false".into());
        }
        for (i, v) in self.variants.iter().enumerate() {
            self.scenario(i, true)
                .validate()
                .map_err(|e| ScenarioFileError(format!("variant '{}': {e}", v.label)))?;
        }
        Ok(())
    }

    /// Scenario for one variant, with or without its interim looks.
    pub fn scenario(&self, variant: usize, with_interims: bool) -> Scenario {
        Scenario {
            endpoint: self.endpoint,
            design: self.design,
            n_max: self.n_max,
            interim_schedule: if with_interims { self.interim_schedule.clone() } else { Vec::new() },
            theta0: self.theta0,
            delta: self.delta,
            rho: self.rho,
            generating_prior: self.generating_prior,
            user_prior: self.variants[variant].user_prior,
            control_generating_prior: self.control.as_ref().map(|c| c.generating_prior),
            control_user_prior: self.control.as_ref().map(|c| c.user_prior),
            cutoff: self.cutoff,
            n_replicates: self.replicates,
            seed: self.seed,
            accrual_rate: self.accrual_rate,
            followup_months: self.followup_months,
            mcmc: self.mcmc,
        }
    }

    /// Index of the variant whose user prior equals the generating prior.
    pub fn matched_variant(&self) -> Option<usize> {
        self.variants.iter().position(|v| v.user_prior == self.generating_prior)
    }

    pub fn with_overrides(mut self, replicates: Option<u64>, seed: Option<u64>) -> Result<Self, ScenarioFileError> {
        if let Some(r) = replicates {
            self.replicates = r;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        self.validate()?;
        Ok(self)
    }
}
