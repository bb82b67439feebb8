//! Closed-form posteriors for binary and normal endpoints.
//!
//! Data are held as sufficient statistics, so updating in batches and
//! updating all at once give identical posteriors. Single-arm superiority
//! probabilities and credible intervals come from the posterior distribution
//! functions directly; two-arm quantities are computed on the distribution of
//! the treatment-minus-control difference, by closed form for normal
//! posteriors and by adaptive quadrature for Beta and Student-t posteriors.

mod quad;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{
    beta_quantile, inc_beta_unchecked, ln_beta, ln_gamma, normal_cdf, normal_pdf,
    normal_quantile, student_t_quantile, t_cdf_unchecked, Interval,
};

/// Beta(alpha, beta) distribution; used both as prior and as posterior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaPrior {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaPrior {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha > 0.0 && self.beta > 0.0 && self.alpha.is_finite() && self.beta.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "Beta prior needs positive finite shapes, got ({}, {})",
                self.alpha, self.beta
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// θ ~ N(mu, sigma0_sq) with observations N(θ, sigma_sq), sigma_sq known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalKnownVarPrior {
    pub mu: f64,
    pub sigma0_sq: f64,
    pub sigma_sq: f64,
}

impl NormalKnownVarPrior {
    pub fn new(mu: f64, sigma0_sq: f64, sigma_sq: f64) -> Result<Self> {
        let p = Self { mu, sigma0_sq, sigma_sq };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_finite()
            && self.sigma0_sq > 0.0
            && self.sigma_sq > 0.0
            && self.sigma0_sq.is_finite()
            && self.sigma_sq.is_finite()
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "normal prior needs finite mean and positive variances, got mu={}, sigma0_sq={}, sigma_sq={}",
                self.mu, self.sigma0_sq, self.sigma_sq
            )))
        }
    }
}

/// Normal–inverse-χ² prior: θ | σ² ~ N(mu, σ²/kappa), σ² ~ Inv-χ²(nu, sigma0_sq).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NixPrior {
    pub mu: f64,
    pub kappa: f64,
    pub nu: f64,
    pub sigma0_sq: f64,
}

impl NixPrior {
    pub fn new(mu: f64, kappa: f64, nu: f64, sigma0_sq: f64) -> Result<Self> {
        let p = Self { mu, kappa, nu, sigma0_sq };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.mu.is_finite() && positive(self.kappa) && positive(self.nu) && positive(self.sigma0_sq) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "NIX prior needs finite mu and positive kappa, nu, sigma0_sq; got {:?}",
                self
            )))
        }
    }
}

/// Binary observations summarized as (n, number of successes).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryData {
    pub n: u64,
    pub successes: u64,
}

impl BinaryData {
    pub fn new(n: u64, successes: u64) -> Result<Self> {
        if successes > n {
            return Err(Error::InvalidParameter(format!(
                "successes ({successes}) exceed n ({n})"
            )));
        }
        Ok(Self { n, successes })
    }

    pub fn push(&mut self, success: bool) {
        self.n += 1;
        self.successes += u64::from(success);
    }

    pub fn merge(&self, other: &BinaryData) -> BinaryData {
        BinaryData {
            n: self.n + other.n,
            successes: self.successes + other.successes,
        }
    }
}

/// Continuous observations summarized as (n, Σx, Σx²).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalData {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl NormalData {
    pub fn from_slice(xs: &[f64]) -> Self {
        let mut d = Self::default();
        for &x in xs {
            d.push(x);
        }
        d
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&self, other: &NormalData) -> NormalData {
        NormalData {
            n: self.n + other.n,
            sum: self.sum + other.sum,
            sum_sq: self.sum_sq + other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Σ(xᵢ − x̄)², floored at zero against rounding.
    pub fn centered_ss(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sum_sq - self.sum * self.sum / self.n as f64).max(0.0)
        }
    }
}

/// Marginal Student-t posterior of θ under the NIX model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TMarginal {
    pub dof: f64,
    pub location: f64,
    /// Squared scale τ_n.
    pub scale_sq: f64,
}

pub fn beta_posterior(prior: &BetaPrior, data: &BinaryData) -> BetaPrior {
    BetaPrior {
        alpha: prior.alpha + data.successes as f64,
        beta: prior.beta + (data.n - data.successes) as f64,
    }
}

/// Returns the posterior mean and variance of θ.
pub fn normal_known_posterior(prior: &NormalKnownVarPrior, data: &NormalData) -> (f64, f64) {
    if data.n == 0 {
        return (prior.mu, prior.sigma0_sq);
    }
    let n = data.n as f64;
    let precision = 1.0 / prior.sigma0_sq + n / prior.sigma_sq;
    let mean = (prior.mu / prior.sigma0_sq + data.sum / prior.sigma_sq) / precision;
    (mean, 1.0 / precision)
}

pub fn nix_posterior(prior: &NixPrior, data: &NormalData) -> TMarginal {
    let n = data.n as f64;
    let xbar = data.mean();
    let kn = prior.kappa + n;
    let location = (n * xbar + prior.kappa * prior.mu) / kn;
    let shrink = if data.n == 0 {
        0.0
    } else {
        prior.kappa * n / kn * (xbar - prior.mu).powi(2)
    };
    let scale_sq = (prior.nu * prior.sigma0_sq + data.centered_ss() + shrink) / ((prior.nu + n) * kn);
    TMarginal {
        dof: prior.nu + n,
        location,
        scale_sq,
    }
}

/// Posterior distribution of a single-arm effect θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Posterior {
    Beta(BetaPrior),
    Normal { mean: f64, var: f64 },
    StudentT(TMarginal),
}

/// Which credible interval to report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntervalKind {
    /// (θ₀.₀₅, ∞)
    OneSided,
    /// (θ₀.₀₂₅, θ₀.₉₇₅)
    Symmetric,
}

impl Posterior {
    pub fn mean(&self) -> f64 {
        match *self {
            Posterior::Beta(b) => b.mean(),
            Posterior::Normal { mean, .. } => mean,
            Posterior::StudentT(t) => t.location,
        }
    }

    /// False only for a Student-t posterior with dof ≤ 1, whose reported mean
    /// is its location.
    pub fn mean_defined(&self) -> bool {
        match *self {
            Posterior::StudentT(t) => t.dof > 1.0,
            _ => true,
        }
    }

    /// Rough (mean, variance) pair used to seed root finding.
    fn moments(&self) -> (f64, f64) {
        match *self {
            Posterior::Beta(b) => {
                let s = b.alpha + b.beta;
                (b.mean(), b.alpha * b.beta / (s * s * (s + 1.0)))
            }
            Posterior::Normal { mean, var } => (mean, var),
            Posterior::StudentT(t) => {
                let infl = if t.dof > 2.0 { t.dof / (t.dof - 2.0) } else { 3.0 };
                (t.location, t.scale_sq * infl)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Posterior::Beta(b) => inc_beta_unchecked(x, b.alpha, b.beta),
            Posterior::Normal { mean, var } => normal_cdf((x - mean) / var.sqrt()),
            Posterior::StudentT(t) => t_cdf_unchecked((x - t.location) / t.scale_sq.sqrt(), t.dof),
        }
    }

    /// Survival function 1 − cdf, evaluated without cancellation.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Posterior::Beta(b) => inc_beta_unchecked(1.0 - x, b.beta, b.alpha),
            Posterior::Normal { mean, var } => normal_cdf((mean - x) / var.sqrt()),
            Posterior::StudentT(t) => t_cdf_unchecked((t.location - x) / t.scale_sq.sqrt(), t.dof),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Posterior::Beta(b) => {
                if x <= 0.0 || x >= 1.0 {
                    0.0
                } else {
                    ((b.alpha - 1.0) * x.ln() + (b.beta - 1.0) * (1.0 - x).ln()
                        - ln_beta(b.alpha, b.beta))
                    .exp()
                }
            }
            Posterior::Normal { mean, var } => {
                let sd = var.sqrt();
                normal_pdf((x - mean) / sd) / sd
            }
            Posterior::StudentT(t) => {
                let s = t.scale_sq.sqrt();
                let z = (x - t.location) / s;
                (ln_gamma(0.5 * (t.dof + 1.0))
                    - ln_gamma(0.5 * t.dof)
                    - 0.5 * (t.dof * std::f64::consts::PI).ln()
                    - 0.5 * (t.dof + 1.0) * (1.0 + z * z / t.dof).ln())
                .exp()
                    / s
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Posterior::Beta(b) => beta_quantile(p, b.alpha, b.beta),
            Posterior::Normal { mean, var } => mean + var.sqrt() * normal_quantile(p),
            Posterior::StudentT(t) => t.location + t.scale_sq.sqrt() * student_t_quantile(p, t.dof),
        }
    }

    pub fn summary(&self, theta0: f64, delta: f64) -> PosteriorSummary {
        PosteriorSummary {
            prob_superior: prob_superior_single(self, theta0, delta),
            post_mean: self.mean(),
            ci_one_sided: credible_interval(self, IntervalKind::OneSided),
            ci_symmetric: credible_interval(self, IntervalKind::Symmetric),
            mean_defined: self.mean_defined(),
        }
    }
}

/// Per-analysis inferential output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    /// Pr(H_a | D).
    pub prob_superior: f64,
    /// Posterior mean of the estimand (θ, θ_t − θ_c, or the hazard ratio).
    pub post_mean: f64,
    pub ci_one_sided: Interval,
    pub ci_symmetric: Interval,
    /// False when `post_mean` is a location whose mean does not exist.
    pub mean_defined: bool,
}

/// Pr(θ − θ₀ > δ | D). For a Beta posterior the threshold is clamped to the
/// support: thresholds below 0 give 1 and thresholds at or above 1 give 0.
pub fn prob_superior_single(posterior: &Posterior, theta0: f64, delta: f64) -> f64 {
    let threshold = theta0 + delta;
    if let Posterior::Beta(_) = posterior {
        if threshold <= 0.0 {
            return 1.0;
        }
        if threshold >= 1.0 {
            return 0.0;
        }
    }
    posterior.sf(threshold)
}

pub fn credible_interval(posterior: &Posterior, kind: IntervalKind) -> Interval {
    match kind {
        IntervalKind::OneSided => Interval::lower_bounded(posterior.quantile(0.05)),
        IntervalKind::Symmetric => Interval::new(posterior.quantile(0.025), posterior.quantile(0.975)),
    }
}

/// Independent treatment and control posteriors of a two-arm trial; the
/// estimand is the difference θ_t − θ_c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RctPosterior {
    pub treatment: Posterior,
    pub control: Posterior,
}

const QUAD_TOL: f64 = 1e-11;
const QUAD_MAX_SEGMENTS: usize = 400;

impl RctPosterior {
    pub fn new(treatment: Posterior, control: Posterior) -> Result<Self> {
        let same = matches!(
            (&treatment, &control),
            (Posterior::Beta(_), Posterior::Beta(_))
                | (Posterior::Normal { .. }, Posterior::Normal { .. })
                | (Posterior::StudentT(_), Posterior::StudentT(_))
        );
        if !same {
            return Err(Error::FamilyMismatch(format!(
                "treatment {treatment:?} vs control {control:?}"
            )));
        }
        Ok(Self { treatment, control })
    }

    pub fn mean(&self) -> f64 {
        self.treatment.mean() - self.control.mean()
    }

    /// Pr(θ_t − θ_c ≤ d) and its density at d.
    pub fn difference_cdf_pdf(&self, d: f64) -> (f64, f64) {
        match (self.treatment, self.control) {
            (Posterior::Normal { mean: mt, var: vt }, Posterior::Normal { mean: mc, var: vc }) => {
                let sd = (vt + vc).sqrt();
                let z = (d - (mt - mc)) / sd;
                (normal_cdf(z), normal_pdf(z) / sd)
            }
            _ => self.quadrature_cdf_pdf(d, true),
        }
    }

    pub fn difference_cdf(&self, d: f64) -> f64 {
        match (self.treatment, self.control) {
            (Posterior::Normal { .. }, Posterior::Normal { .. }) => self.difference_cdf_pdf(d).0,
            // Without the density, refinement is driven by the CDF error alone.
            _ => self.quadrature_cdf_pdf(d, false).0,
        }
    }

    /// Picks the arm whose density is integrated: a bounded density is
    /// preferred, then the more concentrated one.
    fn integrate_over_control(&self) -> bool {
        let bounded = |p: &Posterior| match p {
            Posterior::Beta(b) => b.alpha >= 1.0 && b.beta >= 1.0,
            _ => true,
        };
        match (bounded(&self.treatment), bounded(&self.control)) {
            (true, false) => false,
            (false, true) => true,
            _ => self.control.moments().1 <= self.treatment.moments().1,
        }
    }

    fn quadrature_cdf_pdf(&self, d: f64, with_pdf: bool) -> (f64, f64) {
        let over_control = self.integrate_over_control();
        let (base, other) = if over_control {
            (self.control, self.treatment)
        } else {
            (self.treatment, self.control)
        };
        // Over control y: F(d) = ∫ f_c(y) F_t(y + d) dy, f(d) = ∫ f_c(y) f_t(y + d) dy.
        // Over treatment x: F(d) = ∫ f_t(x) S_c(x − d) dx, f(d) = ∫ f_t(x) f_c(x − d) dx.
        let shift = if over_control { d } else { -d };
        let inner = move |x: f64| -> [f64; 2] {
            let w = base.pdf(x);
            if w == 0.0 {
                return [0.0, 0.0];
            }
            let y = x + shift;
            let tail = if over_control { other.cdf(y) } else { other.sf(y) };
            [w * tail, if with_pdf { w * other.pdf(y) } else { 0.0 }]
        };
        match base {
            Posterior::Beta(_) => {
                let (mean, var) = base.moments();
                let sd = var.sqrt();
                // Skewed posteriors keep non-negligible mass many sds from the
                // mean, so the whole support is integrated.
                let mut breaks = vec![0.0, mean, 1.0];
                for k in [-8.0, -4.0, 4.0, 8.0] {
                    let x = mean + k * sd;
                    if x > 0.0 && x < 1.0 {
                        breaks.push(x);
                    }
                }
                let (lo, hi) = (0.0, 1.0);
                // The other arm's support edges map to kinks of the integrand.
                for edge in [-shift, 1.0 - shift] {
                    if edge > lo && edge < hi {
                        breaks.push(edge);
                    }
                }
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
                let [cdf, pdf] = quad::integrate(inner, &breaks, QUAD_TOL, QUAD_MAX_SEGMENTS);
                (cdf.clamp(0.0, 1.0), pdf.max(0.0))
            }
            Posterior::StudentT(t) => {
                // x = loc + s·v/(1 − v²) maps (−1, 1) onto the real line.
                let s = t.scale_sq.sqrt();
                let mapped = move |v: f64| -> [f64; 2] {
                    let one_m = 1.0 - v * v;
                    if one_m <= 0.0 {
                        return [0.0, 0.0];
                    }
                    let x = t.location + s * v / one_m;
                    let jac = s * (1.0 + v * v) / (one_m * one_m);
                    let [a, b] = inner(x);
                    [a * jac, b * jac]
                };
                let [cdf, pdf] = quad::integrate(
                    mapped,
                    &[-1.0, -0.5, 0.0, 0.5, 1.0],
                    QUAD_TOL,
                    QUAD_MAX_SEGMENTS,
                );
                (cdf.clamp(0.0, 1.0), pdf.max(0.0))
            }
            Posterior::Normal { .. } => unreachable!("normal pairs use the closed form"),
        }
    }

    pub fn difference_quantile(&self, p: f64) -> f64 {
        if let (Posterior::Normal { mean: mt, var: vt }, Posterior::Normal { mean: mc, var: vc }) =
            (self.treatment, self.control)
        {
            return mt - mc + (vt + vc).sqrt() * normal_quantile(p);
        }
        let (mt, vt) = self.treatment.moments();
        let (mc, vc) = self.control.moments();
        let sd = (vt + vc).sqrt();
        let guess = mt - mc + sd * normal_quantile(p);
        let (mut lo, mut hi) = match (self.treatment, self.control) {
            (Posterior::Beta(_), Posterior::Beta(_)) => (-1.0, 1.0),
            _ => (guess - 10.0 * sd, guess + 10.0 * sd),
        };
        while self.difference_cdf(lo) > p {
            lo -= 2.0 * (hi - lo);
        }
        while self.difference_cdf(hi) < p {
            hi += 2.0 * (hi - lo);
        }
        newton_bracketed(p, lo, hi, guess.clamp(lo, hi), |x| self.difference_cdf_pdf(x), 1e-11)
    }

    pub fn summary(&self, delta: f64) -> PosteriorSummary {
        PosteriorSummary {
            prob_superior: prob_superior_rct(self, delta),
            post_mean: self.mean(),
            ci_one_sided: Interval::lower_bounded(self.difference_quantile(0.05)),
            ci_symmetric: Interval::new(self.difference_quantile(0.025), self.difference_quantile(0.975)),
            mean_defined: self.treatment.mean_defined() && self.control.mean_defined(),
        }
    }
}

/// Newton iteration on a joint (cdf, pdf) evaluator, safeguarded by bisection.
fn newton_bracketed<F: Fn(f64) -> (f64, f64)>(p: f64, mut lo: f64, mut hi: f64, start: f64, eval: F, xtol: f64) -> f64 {
    let mut x = start;
    for _ in 0..100 {
        let (c, d) = eval(x);
        let f = c - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = if d > 0.0 { x - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step < xtol || hi - lo < xtol {
            break;
        }
    }
    x
}

/// Pr(θ_t − θ_c > δ | D) under independent arm posteriors.
pub fn prob_superior_rct(posterior: &RctPosterior, delta: f64) -> f64 {
    match (posterior.treatment, posterior.control) {
        (Posterior::Normal { mean: mt, var: vt }, Posterior::Normal { mean: mc, var: vc }) => {
            normal_cdf((mt - mc - delta) / (vt + vc).sqrt())
        }
        _ => (1.0 - posterior.difference_cdf(delta)).clamp(0.0, 1.0),
    }
}
