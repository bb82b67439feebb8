//! Special functions: log-gamma, regularized incomplete beta and gamma,
//! normal and Student-t distribution functions, and quantile inversion.
//!
//! Switchover points:
//! - `reg_inc_beta` evaluates the continued fraction for I_x(a,b) directly
//!   when x < (a+1)/(a+b+2) and for I_{1-x}(b,a) otherwise, where the
//!   fraction converges fastest.
//! - `reg_inc_gamma` uses the power series for P(a,x) when x < a+1 and the
//!   Legendre continued fraction for Q(a,x) otherwise.

use super::SpecError;

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// ln B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64, SpecError> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(SpecError::Domain(format!(
            "reg_inc_beta shape parameters must be positive and finite, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(SpecError::Domain(format!(
            "reg_inc_beta argument must lie in [0, 1], got x={x}"
        )));
    }
    Ok(inc_beta_unchecked(x, a, b))
}

/// I_x(a,b) without argument validation; callers guarantee the domain.
pub(crate) fn inc_beta_unchecked(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        beta_cf_scaled(x, a, b)
    } else {
        1.0 - beta_cf_scaled(1.0 - x, b, a)
    }
}

/// x^a (1-x)^b / (a B(a,b)) times the continued fraction (modified Lentz).
fn beta_cf_scaled(x: f64, a: f64, b: f64) -> f64 {
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b) - a.ln();
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (ln_front.exp() * h).clamp(0.0, 1.0)
}

/// Beta(a, b) log density at x in (0, 1).
pub fn beta_ln_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

/// Regularized lower incomplete gamma function P(a, x).
pub fn reg_inc_gamma(a: f64, x: f64) -> Result<f64, SpecError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(SpecError::Domain(format!(
            "reg_inc_gamma shape must be positive, got a={a}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(SpecError::Domain(format!(
            "reg_inc_gamma argument must be nonnegative, got x={x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        Ok((sum * ln_front.exp()).clamp(0.0, 1.0))
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        Ok((1.0 - ln_front.exp() * h).clamp(0.0, 1.0))
    }
}

/// Gamma(shape, rate) distribution function.
pub fn gamma_cdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    reg_inc_gamma(shape, rate * x).unwrap_or(f64::NAN)
}

/// Standard normal distribution function Φ(z).
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile Φ⁻¹(p).
///
/// Acklam's rational approximation polished by two Halley steps.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let p_low = 0.02425;
    let mut x = if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    for _ in 0..2 {
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Standard Student-t distribution function with `dof` degrees of freedom.
pub fn student_t_cdf(x: f64, dof: f64) -> Result<f64, SpecError> {
    if !(dof > 0.0) {
        return Err(SpecError::Domain(format!(
            "student_t_cdf requires dof > 0, got {dof}"
        )));
    }
    Ok(t_cdf_unchecked(x, dof))
}

pub(crate) fn t_cdf_unchecked(x: f64, dof: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    if x == 0.0 {
        return 0.5;
    }
    // For small |x| the complementary argument x²/(ν+x²) keeps precision.
    let x2 = x * x;
    let tail = if x2 < dof {
        0.5 * (1.0 - inc_beta_unchecked(x2 / (dof + x2), 0.5, 0.5 * dof))
    } else {
        0.5 * inc_beta_unchecked(dof / (dof + x2), 0.5 * dof, 0.5)
    };
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Student-t log density (standard, unit scale).
pub fn student_t_ln_pdf(x: f64, dof: f64) -> f64 {
    ln_gamma(0.5 * (dof + 1.0))
        - ln_gamma(0.5 * dof)
        - 0.5 * (dof * std::f64::consts::PI).ln()
        - 0.5 * (dof + 1.0) * (1.0 + x * x / dof).ln()
}

/// Finds x in [lo, hi] with cdf(x) = p for a continuous nondecreasing cdf.
///
/// Newton steps from `start` using `pdf`, falling back to bisection whenever
/// a step leaves the current bracket. Terminates once the bracket or the step
/// is below `xtol`. With `relative` set (nonnegative support only), bisection
/// is geometric and `xtol` is relative to x, which resolves quantiles that sit
/// many orders of magnitude below 1.
#[allow(clippy::too_many_arguments)]
pub fn invert_cdf<F, G>(
    p: f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
    cdf: F,
    pdf: G,
    xtol: f64,
    relative: bool,
) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut x = start.clamp(lo, hi);
    for _ in 0..400 {
        let f = cdf(x) - p;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = pdf(x);
        let mut next = if d > 0.0 && d.is_finite() { x - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = if relative && lo <= 0.0 {
                hi * 1e-3
            } else if relative && hi > 4.0 * lo {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
        }
        let step = (next - x).abs();
        x = next;
        let tol = if relative { xtol * x } else { xtol };
        if step < tol || hi - lo < tol {
            break;
        }
    }
    x
}

/// Beta(a, b) quantile.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let mean = a / (a + b);
    let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
    let guess = if a > 1.0 && b > 1.0 {
        (mean + sd * normal_quantile(p)).clamp(1e-6, 1.0 - 1e-6)
    } else {
        mean
    };
    let ln_b = ln_beta(a, b);
    invert_cdf(
        p,
        0.0,
        1.0,
        guess,
        |x| inc_beta_unchecked(x, a, b),
        |x| {
            if x <= 0.0 || x >= 1.0 {
                0.0
            } else {
                ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b).exp()
            }
        },
        1e-14,
        true,
    )
}

/// Standard Student-t quantile.
pub fn student_t_quantile(p: f64, dof: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    // Bracket by doubling outward from the normal guess.
    let z = normal_quantile(p);
    let mut lo = z.min(0.0) - 1.0;
    let mut hi = z.max(0.0) + 1.0;
    while t_cdf_unchecked(lo, dof) > p {
        lo *= 2.0;
    }
    while t_cdf_unchecked(hi, dof) < p {
        hi *= 2.0;
    }
    let ln_norm = ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof) - 0.5 * (dof * std::f64::consts::PI).ln();
    invert_cdf(
        p,
        lo,
        hi,
        z.clamp(lo, hi),
        |x| t_cdf_unchecked(x, dof),
        |x| (ln_norm - 0.5 * (dof + 1.0) * (1.0 + x * x / dof).ln()).exp(),
        1e-13 * (1.0 + z.abs()),
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((ln_gamma(0.05) - 2.968_879_201_051_731).abs() < 1e-11);
    }

    #[test]
    fn inc_beta_trivial_cases() {
        assert!((reg_inc_beta(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((reg_inc_beta(0.5, 2.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn inc_beta_rejects_bad_domain() {
        assert!(reg_inc_beta(1.5, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -2.0).is_err());
        assert!(reg_inc_beta(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn inc_gamma_exponential_case() {
        for &x in &[0.1f64, 1.0, 2.5, 10.0] {
            let expected = 1.0 - (-x).exp();
            assert!((reg_inc_gamma(1.0, x).unwrap() - expected).abs() < 1e-14);
        }
        assert!(reg_inc_gamma(0.0, 1.0).is_err());
        assert!(reg_inc_gamma(1.0, -1.0).is_err());
    }

    #[test]
    fn normal_quantile_round_trip() {
        for &p in &[1e-10, 0.001, 0.025, 0.05, 0.3, 0.5, 0.9, 0.975, 0.999_999] {
            let z = normal_quantile(p);
            assert!((normal_cdf(z) - p).abs() < 1e-14 * p.max(1e-3) / 1e-3 + 1e-15);
        }
        assert!((normal_quantile(0.05) + 1.644_853_626_951_472_2).abs() < 1e-12);
    }

    #[test]
    fn t_cdf_domain_and_cauchy() {
        assert!(student_t_cdf(1.0, 0.0).is_err());
        assert!((student_t_cdf(0.0, 3.7).unwrap() - 0.5).abs() < 1e-15);
        assert!((student_t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-13);
        assert!((student_t_cdf(-1.0, 1.0).unwrap() - 0.25).abs() < 1e-13);
    }

    #[test]
    fn t_quantile_matches_cauchy() {
        let pi = std::f64::consts::PI;
        for &p in &[0.025, 0.05, 0.5, 0.975] {
            let q = student_t_quantile(p, 1.0);
            assert!((q - (pi * (p - 0.5)).tan()).abs() < 1e-9, "p={p} q={q}");
        }
    }

    #[test]
    fn beta_quantile_inverts_cdf() {
        for &(a, b) in &[(1.0, 1.0), (33.0, 13.0), (0.05, 60.05), (0.5, 0.5), (103.0, 3.0)] {
            for &p in &[0.025, 0.05, 0.5, 0.975] {
                let q = beta_quantile(p, a, b);
                assert!((inc_beta_unchecked(q, a, b) - p).abs() < 1e-10, "a={a} b={b} p={p}");
            }
        }
    }
}
