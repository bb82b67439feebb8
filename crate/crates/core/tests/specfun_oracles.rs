mod common;

use common::{beta_cdf_oracle, half_line_ln, integrate_ln, normal_cdf_series};
use interimsim::specfun::{
    gamma_cdf, ks_test, normal_cdf, normal_quantile, reg_inc_beta, reg_inc_gamma, sample_beta, sample_exponential, sample_gamma,
    sample_inv_chi2, sample_normal, sample_weibull_median, student_t_cdf, student_t_quantile, RngStream,
};
use proptest::prelude::*;

const KS_ALPHA: f64 = 0.001;

fn uniform_in(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

#[test]
fn incomplete_beta_example_against_quadrature() {
    let got = reg_inc_beta(0.6, 33.0, 13.0).unwrap();
    let want = beta_cdf_oracle(0.6, 33.0, 13.0);
    assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
}

#[test]
fn incomplete_beta_random_against_quadrature() {
    let mut rng = RngStream::new(11, 0);
    for _ in 0..200 {
        let a = (uniform_in(&mut rng, -2.0, 5.3)).exp();
        let b = (uniform_in(&mut rng, -2.0, 5.3)).exp();
        let x = uniform_in(&mut rng, 0.001, 0.999);
        let got = reg_inc_beta(x, a, b).unwrap();
        let want = beta_cdf_oracle(x, a, b);
        assert!((got - want).abs() <= 1e-12, "I_{x}({a}, {b}) = {got}, oracle {want}");
    }
}

/// P(a, x) by quadrature of t^(a-1) e^(-t) over [0, x] and [x, ∞).
fn gamma_p_oracle(a: f64, x: f64) -> f64 {
    let peak = (a - 1.0).max(1e-3);
    let shift = (a - 1.0) * peak.ln() - peak;
    let lo = integrate_ln(|_, dl, _| (a - 1.0) * dl.ln() - dl - shift, 0.0, x, 1e-15);
    let hi = half_line_ln(|t| (a - 1.0) * t.ln() - t - shift, x, a.max(1.0).sqrt(), true, 1e-15);
    lo / (lo + hi)
}

#[test]
fn incomplete_gamma_random_against_quadrature() {
    let mut rng = RngStream::new(12, 0);
    for _ in 0..200 {
        let a = uniform_in(&mut rng, -2.0, 5.0).exp();
        let x = a * uniform_in(&mut rng, -1.5, 1.5).exp();
        let got = reg_inc_gamma(a, x).unwrap();
        let want = gamma_p_oracle(a, x);
        assert!((got - want).abs() <= 1e-12, "P({a}, {x}) = {got}, oracle {want}");
    }
}

#[test]
fn normal_cdf_against_erf_series() {
    assert!((normal_cdf(1.96) - normal_cdf_series(1.96)).abs() <= 1e-12);
    assert!((normal_cdf(1.96) - 0.9750021048517795).abs() <= 1e-12);
    let mut rng = RngStream::new(13, 0);
    for _ in 0..500 {
        let z = uniform_in(&mut rng, -4.0, 4.0);
        assert!((normal_cdf(z) - normal_cdf_series(z)).abs() <= 1e-12, "z = {z}");
        let p = normal_cdf_series(z);
        assert!((normal_quantile(p) - z).abs() <= 1e-8, "quantile at {p}");
    }
}

#[test]
fn student_t_near_normal_for_large_dof() {
    let t = student_t_cdf(1.5, 105.0).unwrap();
    assert!((t - normal_cdf(1.5)).abs() <= 2e-3, "{t}");
}

#[test]
fn student_t_against_quadrature() {
    let mut rng = RngStream::new(14, 0);
    for _ in 0..100 {
        let dof = uniform_in(&mut rng, -1.0, 5.0).exp();
        let x = uniform_in(&mut rng, -6.0, 6.0);
        let ln_g = |t: f64| -0.5 * (dof + 1.0) * (t * t / dof).ln_1p();
        let below = half_line_ln(ln_g, x, 1.0, false, 1e-14);
        let above = half_line_ln(ln_g, x, 1.0, true, 1e-14);
        let want = below / (below + above);
        let got = student_t_cdf(x, dof).unwrap();
        assert!((got - want).abs() <= 1e-10, "t_{dof}({x}) = {got}, oracle {want}");
        assert!((student_t_quantile(want, dof) - x).abs() <= 1e-7 * x.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn incomplete_beta_reflection(x in 1e-6..1.0f64 - 1e-6, a in 0.01..500.0f64, b in 0.01..500.0f64) {
        let left = reg_inc_beta(x, a, b).unwrap();
        let right = reg_inc_beta(1.0 - x, b, a).unwrap();
        prop_assert!((left + right - 1.0).abs() <= 1e-10, "{} + {}", left, right);
    }

    #[test]
    fn incomplete_gamma_in_unit_interval_and_monotone(a in 0.01..500.0f64, x in 0.0..1000.0f64, dx in 0.0..10.0f64) {
        let p = reg_inc_gamma(a, x).unwrap();
        let q = reg_inc_gamma(a, x + dx).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(q >= p - 1e-15);
    }

    #[test]
    fn student_t_symmetry(x in -50.0..50.0f64, dof in 0.1..500.0f64) {
        let s = student_t_cdf(x, dof).unwrap() + student_t_cdf(-x, dof).unwrap();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }
}

fn draws(n: usize, mut f: impl FnMut() -> f64) -> Vec<f64> {
    (0..n).map(|_| f()).collect()
}

fn assert_ks(name: &str, xs: &[f64], cdf: impl Fn(f64) -> f64) {
    let out = ks_test(xs, cdf);
    assert!(out.p_value >= KS_ALPHA, "{name}: D = {}, p = {}", out.statistic, out.p_value);
}

#[test]
fn samplers_match_their_distributions() {
    const N: usize = 100_000;
    let mut params = RngStream::new(15, 0);
    for set in 0..20u64 {
        let mut rng = RngStream::new(16, set);
        let mean = uniform_in(&mut params, -5.0, 5.0);
        let var = uniform_in(&mut params, -3.0, 3.0).exp();
        let xs = draws(N, || sample_normal(&mut rng, mean, var).unwrap());
        assert_ks("normal", &xs, |x| normal_cdf_series(((x - mean) / var.sqrt()).clamp(-6.0, 6.0)));

        let shape = uniform_in(&mut params, -2.0, 4.0).exp();
        let rate = uniform_in(&mut params, -2.0, 2.0).exp();
        let xs = draws(N, || sample_gamma(&mut rng, shape, rate).unwrap());
        assert_ks("gamma", &xs, |x| gamma_cdf(x, shape, rate));

        let a = uniform_in(&mut params, -2.0, 4.0).exp();
        let b = uniform_in(&mut params, -2.0, 4.0).exp();
        let xs = draws(N, || sample_beta(&mut rng, a, b).unwrap());
        assert_ks("beta", &xs, |x| reg_inc_beta(x.clamp(0.0, 1.0), a, b).unwrap());

        let dof = uniform_in(&mut params, 0.5, 100.0);
        let s2 = uniform_in(&mut params, 0.1, 50.0);
        let xs = draws(N, || sample_inv_chi2(&mut rng, dof, s2).unwrap());
        assert_ks("inv_chi2", &xs, |x| 1.0 - reg_inc_gamma(dof / 2.0, dof * s2 / (2.0 * x)).unwrap());

        let theta = uniform_in(&mut params, 0.5, 50.0);
        let kappa = uniform_in(&mut params, 0.3, 5.0);
        let xs = draws(N, || sample_weibull_median(&mut rng, theta, kappa).unwrap());
        assert_ks("weibull", &xs, |x| 1.0 - (-(2f64.ln()) * (x / theta).powf(kappa)).exp());

        let r = uniform_in(&mut params, 0.01, 10.0);
        let xs = draws(N, || sample_exponential(&mut rng, r).unwrap());
        assert_ks("exponential", &xs, |x| -(-r * x).exp_m1());
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

#[test]
fn weibull_sample_median() {
    let mut rng = RngStream::new(17, 0);
    let mut xs = draws(1_000_000, || sample_weibull_median(&mut rng, 8.0, 1.5).unwrap());
    xs.sort_by(f64::total_cmp);
    let median = 0.5 * (xs[499_999] + xs[500_000]);
    assert!((median - 8.0).abs() <= 0.02, "{median}");
}

#[test]
fn inv_chi2_sample_mean() {
    let mut rng = RngStream::new(18, 0);
    let xs = draws(1_000_000, || sample_inv_chi2(&mut rng, 5.0, 40.0).unwrap());
    let (m, _) = mean_var(&xs);
    let want = 5.0 * 40.0 / 3.0;
    assert!((m / want - 1.0).abs() <= 0.01, "{m}");
}

#[test]
fn beta_sample_moments() {
    let mut rng = RngStream::new(19, 0);
    let xs = draws(1_000_000, || sample_beta(&mut rng, 3.0, 3.0).unwrap());
    let (m, v) = mean_var(&xs);
    assert!((m - 0.5).abs() <= 1e-3, "{m}");
    assert!((v - 1.0 / 28.0).abs() <= 5e-4, "{v}");
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let take = |mut r: RngStream| (0..1000).map(|_| r.next_u64()).collect::<Vec<_>>();
    assert_eq!(take(RngStream::new(7, 3)), take(RngStream::new(7, 3)));
    assert_ne!(take(RngStream::new(7, 3)), take(RngStream::new(7, 4)));
    assert_ne!(take(RngStream::new(7, 3)), take(RngStream::new(8, 3)));
    let base = RngStream::new(7, 3);
    assert_eq!(take(base.derive(2)), take(RngStream::new(7, 3).derive(2)));
    assert_ne!(take(base.derive(1)), take(base.derive(2)));
}
