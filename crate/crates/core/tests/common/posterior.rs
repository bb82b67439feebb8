//! Quadrature oracles for single-arm conjugate posteriors.

use super::{breakpoints, grid_max, split};
use interimsim::conjugate::{
    beta_posterior, nix_posterior, normal_known_posterior, BetaPrior, BinaryData, NixPrior, NormalData, NormalKnownVarPrior,
    Posterior,
};
use interimsim::specfun::{sample_normal, RngStream};

pub const TOL: f64 = 1e-8;

pub fn uniform_in(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Unnormalized log posterior with its breakpoints and tail scale.
pub struct Oracle {
    pub ln_g: Box<dyn Fn(f64, f64, f64) -> f64>,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub tail: Option<f64>,
}

impl Oracle {
    pub fn pts(&self, t0: f64) -> Vec<f64> {
        let mut pts = breakpoints(self.lo, self.hi, self.width, &[t0]);
        if self.tail.is_none() {
            pts.retain(|&x| (0.0..=1.0).contains(&x));
        }
        pts
    }

    pub fn shifted(&self, t0: f64) -> (Vec<f64>, impl Fn(f64, f64, f64) -> f64 + '_) {
        let pts = self.pts(t0);
        let shift = grid_max(|x| (self.ln_g)(x, x - pts[0], pts[pts.len() - 1] - x), &pts);
        (pts, move |x, d0, d1| (self.ln_g)(x, d0, d1) - shift)
    }

    pub fn cdf(&self, t0: f64) -> f64 {
        let (pts, g) = self.shifted(t0);
        let (below, above) = split(g, &pts, self.tail, t0, 0);
        below / (below + above)
    }

    pub fn mean(&self, pivot: f64) -> f64 {
        let (pts, g) = self.shifted(pivot);
        let (b0, a0) = split(&g, &pts, self.tail, pivot, 0);
        let (b1, a1) = split(&g, &pts, self.tail, pivot, 1);
        pivot + (a1 - b1) / (a0 + b0)
    }
}

pub fn beta_oracle(alpha: f64, beta: f64, n: u64, s: u64) -> Oracle {
    let (succ, fail) = (s as f64, (n - s) as f64);
    Oracle {
        ln_g: Box::new(move |_, d0, d1| (alpha - 1.0) * d0.ln() + (beta - 1.0) * d1.ln() + succ * d0.ln() + fail * d1.ln()),
        lo: 0.0,
        hi: 1.0,
        width: 0.02,
        tail: None,
    }
}

pub fn normal_oracle(prior: NormalKnownVarPrior, xs: Vec<f64>) -> Oracle {
    let n = xs.len() as f64;
    let xbar = if xs.is_empty() { prior.mu } else { xs.iter().sum::<f64>() / n };
    let s = prior.sigma0_sq.sqrt().min((prior.sigma_sq / n.max(1e-300)).sqrt());
    let (mu, v0, v) = (prior.mu, prior.sigma0_sq, prior.sigma_sq);
    Oracle {
        ln_g: Box::new(move |t, _, _| -(t - mu).powi(2) / (2.0 * v0) - xs.iter().map(|x| (x - t).powi(2)).sum::<f64>() / (2.0 * v)),
        lo: mu.min(xbar) - 12.0 * s,
        hi: mu.max(xbar) + 12.0 * s,
        width: s,
        tail: Some(s),
    }
}

/// Marginal of θ: S(θ)^(-(ν+n+1)/2) with S = νσ0² + κ(θ-μ)² + Σ(x-θ)².
pub fn nix_oracle(prior: NixPrior, xs: Vec<f64>) -> Oracle {
    let n = xs.len() as f64;
    let big_s = {
        let xs = xs.clone();
        move |t: f64| {
            prior.nu * prior.sigma0_sq + prior.kappa * (t - prior.mu).powi(2) + xs.iter().map(|x| (x - t).powi(2)).sum::<f64>()
        }
    };
    let xbar = if xs.is_empty() { prior.mu } else { xs.iter().sum::<f64>() / n };
    // Ternary search for the minimizer of S.
    let (mut a, mut b) = (prior.mu.min(xbar) - 1.0, prior.mu.max(xbar) + 1.0);
    for _ in 0..200 {
        let (m1, m2) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
        if big_s(m1) < big_s(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let centre = 0.5 * (a + b);
    let s = (big_s(centre) / ((prior.kappa + n) * (prior.nu + n))).sqrt();
    let power = 0.5 * (prior.nu + n + 1.0);
    Oracle {
        ln_g: Box::new(move |t, _, _| -power * big_s(t).ln()),
        lo: centre - 12.0 * s,
        hi: centre + 12.0 * s,
        width: s,
        tail: Some(s),
    }
}

/// Compares the tail probability, mean and interval endpoints with the oracle.
pub fn check(name: &str, post: &Posterior, oracle: &Oracle, theta0: f64, delta: f64) -> Result<(), String> {
    let sum = post.summary(theta0, delta);
    let want = 1.0 - oracle.cdf(theta0 + delta);
    if !((sum.prob_superior - want).abs() <= TOL) {
        return Err(format!("{name}: Pr = {}, oracle {want}", sum.prob_superior));
    }
    if sum.mean_defined && !matches!(post, Posterior::StudentT(t) if t.dof < 1.5) {
        let m = oracle.mean(theta0);
        if !((sum.post_mean - m).abs() <= TOL * m.abs().max(1.0)) {
            return Err(format!("{name}: mean {} vs {m}", sum.post_mean));
        }
    }
    for (q, p) in [(sum.ci_one_sided.lower, 0.05), (sum.ci_symmetric.lower, 0.025), (sum.ci_symmetric.upper, 0.975)] {
        let c = oracle.cdf(q);
        // Where F is too steep for f64 resolution in θ, accept a quantile
        // within 1e-8 (on the posterior's scale) of the true one.
        let eps = 1e-8 * oracle.width.min(1.0);
        let bracketed = || oracle.cdf(q - eps) <= p + TOL && oracle.cdf(q + eps) >= p - TOL;
        if !((c - p).abs() <= TOL || bracketed()) {
            return Err(format!("{name}: F({q}) = {c}, want {p}"));
        }
    }
    Ok(())
}

pub fn draw_data(rng: &mut RngStream, n: usize) -> Vec<f64> {
    let centre = uniform_in(rng, -2.0, 2.0);
    let var = uniform_in(rng, -2.0, 3.0).exp();
    (0..n).map(|_| sample_normal(rng, centre, var).unwrap()).collect()
}

/// Random beta, normal and normal-inverse-χ² posteriors (cycling), each
/// checked against its oracle.
pub fn random_single_arm_checks(seed: u64, count: usize) -> Vec<Result<(), String>> {
    let mut rng = RngStream::new(seed, 0);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let n = (rng.uniform() * 101.0) as usize;
        let theta0 = uniform_in(&mut rng, -0.5, 0.5);
        let delta = if i % 3 == 0 { 0.05 } else { 0.0 };
        match i % 3 {
            0 => {
                let prior = BetaPrior::new(uniform_in(&mut rng, -3.0, 4.0).exp(), uniform_in(&mut rng, -3.0, 4.0).exp()).unwrap();
                let s = (rng.uniform() * (n as f64 + 1.0)) as u64;
                let post = Posterior::Beta(beta_posterior(&prior, &BinaryData::new(n as u64, s.min(n as u64)).unwrap()));
                let oracle = beta_oracle(prior.alpha, prior.beta, n as u64, s.min(n as u64));
                out.push(check(&format!("beta #{i} {prior:?} n={n} s={s}"), &post, &oracle, 0.5 + 0.9 * theta0, delta));
            }
            1 => {
                let prior = NormalKnownVarPrior::new(
                    uniform_in(&mut rng, -2.0, 2.0),
                    uniform_in(&mut rng, -4.0, 7.0).exp(),
                    uniform_in(&mut rng, -2.0, 4.0).exp(),
                )
                .unwrap();
                let xs = draw_data(&mut rng, n);
                let (mean, var) = normal_known_posterior(&prior, &NormalData::from_slice(&xs));
                let post = Posterior::Normal { mean, var };
                out.push(check(&format!("normal #{i} {prior:?} n={n}"), &post, &normal_oracle(prior, xs), theta0, delta));
            }
            _ => {
                let prior = NixPrior::new(
                    uniform_in(&mut rng, -2.0, 2.0),
                    uniform_in(&mut rng, -3.0, 3.0).exp(),
                    uniform_in(&mut rng, -1.0, 3.0).exp(),
                    uniform_in(&mut rng, -2.0, 3.0).exp(),
                )
                .unwrap();
                let xs = draw_data(&mut rng, n);
                let post = Posterior::StudentT(nix_posterior(&prior, &NormalData::from_slice(&xs)));
                out.push(check(&format!("nix #{i} {prior:?} n={n}"), &post, &nix_oracle(prior, xs), theta0, delta));
            }
        }
    }
    out
}
