//! Trial simulation: truth, data, interim looks and the stopping rule.
//!
//! Every replicate owns a random stream keyed by (seed, replicate index), and
//! sub-streams for the truth, the patient data, the accrual process and each
//! MCMC analysis are derived from it. The MCMC lane is keyed by the look's
//! sample size, so a design with interims and the same design without them
//! see identical truths, identical data and an identical final analysis.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{
    beta_posterior, nix_posterior, normal_known_posterior, BetaPrior, BinaryData, NixPrior, NormalData,
    NormalKnownVarPrior, Posterior, PosteriorSummary, RctPosterior,
};
use crate::error::{Error, Result};
use crate::mcmc::{sample_posterior, summarize_draws, McmcConfig, SummaryTarget, SurvData, SurvObservation, SurvPrior};
use crate::specfun::{
    sample_beta, sample_exponential, sample_inv_chi2, sample_normal, sample_weibull_median, RngStream,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Binary,
    NormalKnownVar,
    NormalUnknownVar,
    Survival,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    SingleArm,
    Rct,
}

/// Prior for one arm. As a data-generating prior, `Normal` draws θ and uses
/// `sigma_sq` as the true observation variance; `Nix` draws both.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ArmPrior {
    Beta(BetaPrior),
    Normal(NormalKnownVarPrior),
    Nix(NixPrior),
    Survival(SurvPrior),
}

impl ArmPrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            ArmPrior::Beta(p) => p.validate(),
            ArmPrior::Normal(p) => p.validate(),
            ArmPrior::Nix(p) => p.validate(),
            ArmPrior::Survival(p) => p.validate(),
        }
    }

    fn family(&self) -> &'static str {
        match self {
            ArmPrior::Beta(_) => "beta",
            ArmPrior::Normal(_) => "normal",
            ArmPrior::Nix(_) => "nix",
            ArmPrior::Survival(_) => "survival",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub endpoint: Endpoint,
    pub design: Design,
    /// Maximum sample size, per arm for two-arm trials.
    pub n_max: u32,
    /// Interim look sizes (per arm for two-arm trials), strictly increasing
    /// and below `n_max`.
    pub interim_schedule: Vec<u32>,
    /// Single-arm historical control value θ₀.
    pub theta0: f64,
    pub delta: f64,
    /// Hazard-ratio bound for two-arm survival trials.
    pub rho: f64,
    pub generating_prior: ArmPrior,
    pub user_prior: ArmPrior,
    pub control_generating_prior: Option<ArmPrior>,
    pub control_user_prior: Option<ArmPrior>,
    pub cutoff: f64,
    pub n_replicates: u64,
    pub seed: u64,
    /// Patients per month.
    pub accrual_rate: f64,
    pub followup_months: f64,
    pub mcmc: McmcConfig,
}

impl Scenario {
    pub fn is_rct(&self) -> bool {
        self.design == Design::Rct
    }

    /// Look sizes including the final analysis.
    pub fn looks(&self) -> Vec<u32> {
        let mut v = self.interim_schedule.clone();
        v.push(self.n_max);
        v
    }

    pub fn without_interims(&self) -> Scenario {
        Scenario {
            interim_schedule: Vec::new(),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        if self.n_max == 0 {
            return bad("n_max must be positive".into());
        }
        let mut prev = 0;
        for &n in &self.interim_schedule {
            if n <= prev || n >= self.n_max {
                return bad(format!(
                    "interim schedule {:?} must be strictly increasing, positive and below n_max {}",
                    self.interim_schedule, self.n_max
                ));
            }
            prev = n;
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return bad(format!("cutoff must lie in (0, 1], got {}", self.cutoff));
        }
        if !self.theta0.is_finite() || !self.delta.is_finite() {
            return bad("theta0 and delta must be finite".into());
        }
        if self.endpoint == Endpoint::Survival {
            if !(self.accrual_rate > 0.0) || !self.accrual_rate.is_finite() {
                return bad(format!("accrual_rate must be positive, got {}", self.accrual_rate));
            }
            if !(self.followup_months >= 0.0) || !self.followup_months.is_finite() {
                return bad(format!("followup_months must be nonnegative, got {}", self.followup_months));
            }
            if self.is_rct() && !(self.rho > 0.0) {
                return bad(format!("rho must be positive, got {}", self.rho));
            }
            self.mcmc.validate()?;
        }
        self.generating_prior.validate()?;
        self.user_prior.validate()?;
        self.check_families(&self.generating_prior, &self.user_prior, "treatment")?;

        let needs_control = self.is_rct() && self.endpoint != Endpoint::Survival;
        match (needs_control, &self.control_generating_prior, &self.control_user_prior) {
            (true, Some(g), Some(u)) => {
                g.validate()?;
                u.validate()?;
                self.check_families(g, u, "control")
            }
            (true, _, _) => bad("two-arm binary and normal trials need both control priors".into()),
            (false, None, None) => Ok(()),
            (false, _, _) => bad("control priors are only used by two-arm binary and normal trials".into()),
        }
    }

    fn check_families(&self, generating: &ArmPrior, user: &ArmPrior, arm: &str) -> Result<()> {
        use ArmPrior::*;
        let ok = match self.endpoint {
            Endpoint::Binary => matches!((generating, user), (Beta(_), Beta(_))),
            Endpoint::NormalKnownVar => matches!((generating, user), (Normal(_), Normal(_))),
            Endpoint::NormalUnknownVar => matches!((generating, user), (Nix(_) | Normal(_), Nix(_))),
            Endpoint::Survival => matches!((generating, user), (Survival(_), Survival(_))),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScenario(format!(
                "{arm} priors ({} generating, {} user) do not fit the {:?} endpoint",
                generating.family(),
                user.family(),
                self.endpoint
            )))
        }
    }
}

/// True parameters of one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    /// Treatment-arm effect θ (control median for two-arm survival).
    pub theta: f64,
    /// Observation variance for normal endpoints.
    pub sigma_sq: Option<f64>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub control_theta: Option<f64>,
    pub control_sigma_sq: Option<f64>,
}

impl Truth {
    /// Value of the reported estimand: the treatment-arm θ, or exp(β) for
    /// two-arm survival trials.
    pub fn estimand(&self) -> f64 {
        self.beta.map_or(self.theta, f64::exp)
    }
}

fn draw_arm(prior: &ArmPrior, rng: &mut RngStream) -> Result<(f64, Option<f64>)> {
    Ok(match prior {
        ArmPrior::Beta(p) => (sample_beta(rng, p.alpha, p.beta)?, None),
        ArmPrior::Normal(p) => (sample_normal(rng, p.mu, p.sigma0_sq)?, Some(p.sigma_sq)),
        ArmPrior::Nix(p) => {
            let s2 = sample_inv_chi2(rng, p.nu, p.sigma0_sq)?;
            (sample_normal(rng, p.mu, s2 / p.kappa)?, Some(s2))
        }
        ArmPrior::Survival(_) => unreachable!("survival truths are drawn jointly"),
    })
}

pub fn draw_truth(scenario: &Scenario, rng: &mut RngStream) -> Result<Truth> {
    if let ArmPrior::Survival(p) = &scenario.generating_prior {
        let (theta, kappa, beta) = p.draw(rng, scenario.is_rct())?;
        return Ok(Truth {
            theta,
            sigma_sq: None,
            kappa: Some(kappa),
            beta: scenario.is_rct().then_some(beta),
            control_theta: None,
            control_sigma_sq: None,
        });
    }
    let (theta, sigma_sq) = draw_arm(&scenario.generating_prior, rng)?;
    let control = match &scenario.control_generating_prior {
        Some(p) if scenario.is_rct() => Some(draw_arm(p, rng)?),
        _ => None,
    };
    Ok(Truth {
        theta,
        sigma_sq,
        kappa: None,
        beta: None,
        control_theta: control.map(|c| c.0),
        control_sigma_sq: control.and_then(|c| c.1),
    })
}

/// Whether H₀ holds: θ − θ₀ ≤ δ, θ_t − θ_c ≤ δ, or exp(β) ≥ ρ.
pub fn h0_true(scenario: &Scenario, truth: &Truth) -> bool {
    match (truth.beta, truth.control_theta) {
        (Some(b), _) => b.exp() >= scenario.rho,
        (None, Some(c)) => truth.theta - c <= scenario.delta,
        (None, None) => truth.theta - scenario.theta0 <= scenario.delta,
    }
}

/// Patient arrival times and the calendar times of the analyses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccrualPlan {
    pub arrivals: Vec<f64>,
    /// One per look, in look order; the last is the final analysis.
    pub analysis_times: Vec<f64>,
}

/// Poisson accrual of every patient (both arms for two-arm trials). Interim
/// looks happen at the arrival of the patient completing the look; the final
/// analysis waits `followup_months` after the last arrival.
pub fn build_accrual(scenario: &Scenario, rng: &mut RngStream) -> Result<AccrualPlan> {
    let per_look = if scenario.is_rct() { 2 } else { 1 };
    let total = scenario.n_max as usize * per_look;
    let mut arrivals = Vec::with_capacity(total);
    let mut clock = 0.0;
    for _ in 0..total {
        clock += sample_exponential(rng, scenario.accrual_rate)?;
        arrivals.push(clock);
    }
    let mut analysis_times: Vec<f64> = scenario
        .interim_schedule
        .iter()
        .map(|&n| arrivals[n as usize * per_look - 1])
        .collect();
    analysis_times.push(arrivals.last().copied().unwrap_or(0.0) + scenario.followup_months);
    Ok(AccrualPlan {
        arrivals,
        analysis_times,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub replicate: u64,
    pub truth: Truth,
    /// Truth of the reported estimand.
    pub true_value: f64,
    pub h0_true: bool,
    pub rejected: bool,
    /// Index into the looks (interims then final) at which the trial ended.
    pub stop_analysis_index: usize,
    pub stopped_early: bool,
    /// Patients enrolled when the trial ended, both arms counted.
    pub final_n: u32,
    pub summary: PosteriorSummary,
}

/// Latent survival cohort: arrival, event time and arm of every patient.
struct Cohort {
    arrivals: Vec<f64>,
    event_times: Vec<f64>,
    treated: Vec<bool>,
    analysis_times: Vec<f64>,
}

enum ArmData {
    Binary(Vec<bool>),
    Normal(Vec<f64>),
}

enum TrialData {
    Closed { treatment: ArmData, control: Option<ArmData> },
    Survival(Cohort),
}

fn generate_arm(prior: &ArmPrior, theta: f64, sigma_sq: Option<f64>, n: usize, rng: &mut RngStream) -> Result<ArmData> {
    Ok(match prior {
        ArmPrior::Beta(_) => ArmData::Binary((0..n).map(|_| rng.uniform() < theta).collect()),
        _ => {
            let var = sigma_sq.expect("normal truths carry a variance");
            ArmData::Normal((0..n).map(|_| sample_normal(rng, theta, var)).collect::<Result<_, _>>()?)
        }
    })
}

fn generate_data(scenario: &Scenario, truth: &Truth, rng: &mut RngStream) -> Result<TrialData> {
    let n = scenario.n_max as usize;
    if scenario.endpoint == Endpoint::Survival {
        let plan = build_accrual(scenario, &mut rng.derive(0))?;
        let total = plan.arrivals.len();
        let treated: Vec<bool> = if scenario.is_rct() {
            // Permuted blocks of two keep the arms balanced at every look.
            let mut v = Vec::with_capacity(total);
            for _ in 0..total / 2 {
                let first = rng.uniform() < 0.5;
                v.push(first);
                v.push(!first);
            }
            v
        } else {
            vec![true; total]
        };
        let kappa = truth.kappa.expect("survival truth has a shape");
        let treated_median = truth.theta * (-truth.beta.unwrap_or(0.0) / kappa).exp();
        let event_times = treated
            .iter()
            .map(|&t| {
                let median = if t && scenario.is_rct() { treated_median } else { truth.theta };
                sample_weibull_median(rng, median, kappa)
            })
            .collect::<Result<_, _>>()?;
        return Ok(TrialData::Survival(Cohort {
            arrivals: plan.arrivals,
            event_times,
            treated,
            analysis_times: plan.analysis_times,
        }));
    }
    let treatment = generate_arm(&scenario.generating_prior, truth.theta, truth.sigma_sq, n, rng)?;
    let control = match (&scenario.control_generating_prior, truth.control_theta) {
        (Some(p), Some(c)) => Some(generate_arm(p, c, truth.control_sigma_sq, n, rng)?),
        _ => None,
    };
    Ok(TrialData::Closed { treatment, control })
}

impl Cohort {
    /// Observed data at calendar time `at`, with administrative censoring.
    fn observed(&self, at: f64) -> SurvData {
        let observations = self
            .arrivals
            .iter()
            .zip(&self.event_times)
            .zip(&self.treated)
            .take_while(|((&a, _), _)| a <= at)
            .map(|((&a, &x), &treated)| {
                let window = at - a;
                SurvObservation {
                    time: x.min(window),
                    event: x <= window,
                    treated,
                }
            })
            .collect();
        SurvData { observations }
    }
}

fn arm_posterior(prior: &ArmPrior, data: &ArmData, n: usize) -> Posterior {
    match (prior, data) {
        (ArmPrior::Beta(p), ArmData::Binary(xs)) => {
            let successes = xs[..n].iter().filter(|&&x| x).count() as u64;
            Posterior::Beta(beta_posterior(
                p,
                &BinaryData {
                    n: n as u64,
                    successes,
                },
            ))
        }
        (ArmPrior::Normal(p), ArmData::Normal(xs)) => {
            let (mean, var) = normal_known_posterior(p, &NormalData::from_slice(&xs[..n]));
            Posterior::Normal { mean, var }
        }
        (ArmPrior::Nix(p), ArmData::Normal(xs)) => Posterior::StudentT(nix_posterior(p, &NormalData::from_slice(&xs[..n]))),
        _ => unreachable!("families are checked by Scenario::validate"),
    }
}

/// Lazily evaluated analyses of one replicate.
struct Analyses<'a> {
    scenario: &'a Scenario,
    data: TrialData,
    looks: Vec<u32>,
    rng: RngStream,
    probs: Vec<Option<f64>>,
    summaries: Vec<Option<PosteriorSummary>>,
}

enum Closed {
    Single(Posterior),
    Rct(RctPosterior),
}

impl<'a> Analyses<'a> {
    fn closed_posterior(&self, k: usize) -> Result<Option<Closed>> {
        let TrialData::Closed { treatment, control } = &self.data else {
            return Ok(None);
        };
        let n = self.looks[k] as usize;
        let t = arm_posterior(&self.scenario.user_prior, treatment, n);
        Ok(Some(match (control, &self.scenario.control_user_prior) {
            (Some(c), Some(cp)) => Closed::Rct(RctPosterior::new(t, arm_posterior(cp, c, n))?),
            _ => Closed::Single(t),
        }))
    }

    fn prob(&mut self, k: usize) -> Result<f64> {
        if let Some(p) = self.probs[k] {
            return Ok(p);
        }
        let p = match self.closed_posterior(k)? {
            Some(Closed::Single(post)) => crate::conjugate::prob_superior_single(&post, self.scenario.theta0, self.scenario.delta),
            Some(Closed::Rct(post)) => crate::conjugate::prob_superior_rct(&post, self.scenario.delta),
            None => self.summary(k)?.prob_superior,
        };
        self.probs[k] = Some(p);
        Ok(p)
    }

    fn summary(&mut self, k: usize) -> Result<PosteriorSummary> {
        if let Some(s) = self.summaries[k] {
            return Ok(s);
        }
        let s = match self.closed_posterior(k)? {
            Some(Closed::Single(post)) => post.summary(self.scenario.theta0, self.scenario.delta),
            // Two-arm trials decide on the difference but report the
            // treatment-arm posterior.
            Some(Closed::Rct(post)) => PosteriorSummary {
                prob_superior: self.prob(k)?,
                ..post.treatment.summary(self.scenario.theta0, self.scenario.delta)
            },
            None => self.survival_summary(k)?,
        };
        self.summaries[k] = Some(s);
        Ok(s)
    }

    fn survival_summary(&self, k: usize) -> Result<PosteriorSummary> {
        let TrialData::Survival(cohort) = &self.data else {
            unreachable!("closed-form data handled by caller")
        };
        let ArmPrior::Survival(prior) = &self.scenario.user_prior else {
            unreachable!("families are checked by Scenario::validate")
        };
        // Interim times are stored in look order; the final time is last.
        let at = if k + 1 == self.looks.len() {
            *cohort.analysis_times.last().expect("final analysis time")
        } else {
            cohort.analysis_times[k]
        };
        let data = cohort.observed(at);
        let mut rng = self.rng.derive(1_000 + u64::from(self.looks[k]));
        let rct = self.scenario.is_rct();
        let draws = sample_posterior(prior, &data, &self.scenario.mcmc, rct, &mut rng)?;
        let target = if rct { SummaryTarget::HazardRatio } else { SummaryTarget::Theta };
        summarize_draws(&draws, target, self.scenario.theta0, self.scenario.delta, self.scenario.rho)
    }
}

/// Records of one replicate under the design with interims and, optionally,
/// under the same design with only the final analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedRecord {
    pub fixed: TrialRecord,
    pub adaptive: TrialRecord,
}

fn simulate(scenario: &Scenario, replicate: u64, with_fixed: bool) -> Result<(TrialRecord, Option<TrialRecord>)> {
    let base = RngStream::new(scenario.seed, replicate);
    let truth = draw_truth(scenario, &mut base.derive(1))?;
    let data = generate_data(scenario, &truth, &mut base.derive(2))?;
    let looks = scenario.looks();
    let mut analyses = Analyses {
        scenario,
        data,
        rng: base,
        probs: vec![None; looks.len()],
        summaries: vec![None; looks.len()],
        looks,
    };
    let last = analyses.looks.len() - 1;
    let h0 = h0_true(scenario, &truth);
    let per_look = if scenario.is_rct() { 2 } else { 1 };

    let record_at = |analyses: &mut Analyses, k: usize, rejected: bool| -> Result<TrialRecord> {
        Ok(TrialRecord {
            replicate,
            truth,
            true_value: truth.estimand(),
            h0_true: h0,
            rejected,
            stop_analysis_index: k,
            stopped_early: k < last,
            final_n: analyses.looks[k] * per_look,
            summary: analyses.summary(k)?,
        })
    };

    let mut stop = last;
    for k in 0..last {
        if analyses.prob(k)? > scenario.cutoff {
            stop = k;
            break;
        }
    }
    let adaptive_rejected = stop < last || analyses.prob(last)? > scenario.cutoff;
    let adaptive = record_at(&mut analyses, stop, adaptive_rejected)?;
    let fixed = if with_fixed {
        let rejected = analyses.prob(last)? > scenario.cutoff;
        let mut r = record_at(&mut analyses, last, rejected)?;
        r.stop_analysis_index = 0;
        Some(r)
    } else {
        None
    };
    Ok((adaptive, fixed))
}

/// Simulates replicate `replicate` of `scenario`.
pub fn run_trial(scenario: &Scenario, replicate: u64) -> Result<TrialRecord> {
    scenario.validate()?;
    simulate(scenario, replicate, false)
        .map(|r| r.0)
        .map_err(|e| wrap(replicate, e))
}

/// Simulates replicate `replicate` with and without the interim looks from
/// the same truth and data.
pub fn run_trial_paired(scenario: &Scenario, replicate: u64) -> Result<PairedRecord> {
    scenario.validate()?;
    let (adaptive, fixed) = simulate(scenario, replicate, true).map_err(|e| wrap(replicate, e))?;
    Ok(PairedRecord {
        fixed: fixed.expect("requested"),
        adaptive,
    })
}

fn wrap(index: u64, source: Error) -> Error {
    Error::Replicate {
        index,
        source: Box::new(source),
    }
}

/// Execution options shared by the scenario runners.
#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
    /// Called with (completed, total) as replicates finish.
    pub progress: Option<&'a (dyn Fn(u64, u64) + Sync)>,
}

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.001;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioRun {
    pub fixed: Vec<TrialRecord>,
    pub adaptive: Vec<TrialRecord>,
    /// Replicates dropped because a posterior computation failed.
    pub failures: Vec<(u64, Error)>,
}

/// Successful results in replicate order, and the replicates that failed.
type Executed<T> = (Vec<T>, Vec<(u64, Error)>);

fn execute<T: Send>(scenario: &Scenario, options: RunOptions, job: impl Fn(u64) -> Result<T> + Sync) -> Result<Executed<T>> {
    scenario.validate()?;
    let total = scenario.n_replicates;
    let done = AtomicU64::new(0);
    let work = || -> Vec<(u64, Result<T>)> {
        (0..total)
            .into_par_iter()
            .map(|i| {
                let r = job(i);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(cb) = options.progress {
                    cb(finished, total);
                }
                (i, r)
            })
            .collect()
    };
    let results = match options.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let mut ok = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => failures.push((i, e)),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_RATE * total as f64 {
        let failed = failures.len();
        let (index, first) = failures.swap_remove(0);
        return Err(Error::TooManyFailures {
            failed,
            total: total as usize,
            first: Box::new(wrap(index, first)),
        });
    }
    Ok((ok, failures))
}

/// Runs every replicate of the design with interims; records come back in
/// replicate order regardless of thread count.
pub fn run_scenario(scenario: &Scenario, options: RunOptions) -> Result<Vec<TrialRecord>> {
    let (records, _) = execute(scenario, options, |i| simulate(scenario, i, false).map(|r| r.0))?;
    Ok(records)
}

/// Runs every replicate with and without interim looks on paired streams.
pub fn run_scenario_paired(scenario: &Scenario, options: RunOptions) -> Result<ScenarioRun> {
    let (pairs, failures) = execute(scenario, options, |i| simulate(scenario, i, true))?;
    let mut fixed = Vec::with_capacity(pairs.len());
    let mut adaptive = Vec::with_capacity(pairs.len());
    for (a, f) in pairs {
        adaptive.push(a);
        fixed.push(f.expect("requested"));
    }
    Ok(ScenarioRun {
        fixed,
        adaptive,
        failures,
    })
}
