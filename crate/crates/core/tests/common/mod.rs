//! Quadrature oracles shared by the integration tests. Nothing here calls the
//! library's special functions.
#![allow(dead_code)]

pub mod posterior;

use std::f64::consts::FRAC_PI_2;

/// Tanh-sinh quadrature of exp(ln_f) over [a, b]. `ln_f` receives the node x
/// and its distances to a and to b (accurate near the endpoints). Terms with
/// ln_f = -inf contribute zero.
pub fn integrate_ln<F: Fn(f64, f64, f64) -> f64>(ln_f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    let ln_h = h.ln();
    let term = |ln_w: f64, x: f64, dl: f64, dr: f64| {
        let v = ln_f(x, dl, dr);
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            (ln_w + ln_h + v).exp()
        }
    };
    // Pair of nodes at ±t.
    let sum_at = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let q = (-2.0 * u).exp();
        if q == 0.0 {
            return 0.0;
        }
        let ln_w = FRAC_PI_2.ln() + t.cosh().ln() + (4.0 * q).ln() - 2.0 * (1.0 + q).ln();
        let delta = 2.0 * q / (1.0 + q);
        let d = h * delta;
        if d == 0.0 {
            return 0.0;
        }
        let far = h * (2.0 - delta);
        term(ln_w, b - d, far, d) + term(ln_w, a + d, d, far)
    };
    let t_max = 7.0;
    let mut step = 1.0;
    let mut total = term(FRAC_PI_2.ln(), c, h, h);
    let mut k = 1.0;
    while k * step <= t_max {
        total += sum_at(k * step);
        k += 1.0;
    }
    let mut estimate = total * step;
    for level in 1..=14 {
        step *= 0.5;
        let mut t = step;
        while t <= t_max {
            total += sum_at(t);
            t += 2.0 * step;
        }
        let next = total * step;
        if level >= 4 && (next - estimate).abs() <= rel_tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let pos = integrate_ln(|x, _, _| { let v = f(x); if v > 0.0 { v.ln() } else { f64::NEG_INFINITY } }, a, b, rel_tol);
    let neg = integrate_ln(|x, _, _| { let v = f(x); if v < 0.0 { (-v).ln() } else { f64::NEG_INFINITY } }, a, b, rel_tol);
    pos - neg
}

/// ∫ exp(ln_g(θ)) over [t0, ∞) (`upper`) or (-∞, t0], via θ = t0 ± s·u/(1-u).
pub fn half_line_ln<G: Fn(f64) -> f64>(ln_g: G, t0: f64, s: f64, upper: bool, rel_tol: f64) -> f64 {
    let sign = if upper { 1.0 } else { -1.0 };
    integrate_ln(
        |_, u, one_minus_u| {
            let theta = t0 + sign * s * u / one_minus_u;
            if !theta.is_finite() {
                return f64::NEG_INFINITY;
            }
            ln_g(theta) + s.ln() - 2.0 * one_minus_u.ln()
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// Beta(a, b) CDF by quadrature of the unnormalized density.
pub fn beta_cdf_oracle(x: f64, a: f64, b: f64) -> f64 {
    let shift = beta_shift(a, b);
    // Each piece rebuilds the distances to 0 and 1 from its own endpoints.
    let lo = integrate_ln(|_, dl, dr| (a - 1.0) * dl.ln() + (b - 1.0) * (1.0 - x + dr).ln() - shift, 0.0, x, 1e-15);
    let hi = integrate_ln(|_, dl, dr| (a - 1.0) * (x + dl).ln() + (b - 1.0) * dr.ln() - shift, x, 1.0, 1e-15);
    lo / (lo + hi)
}

/// Log-kernel maximum on a coarse grid, to keep exponentials in range.
pub fn beta_shift(a: f64, b: f64) -> f64 {
    (1..1000)
        .map(|i| {
            let x = i as f64 / 1000.0;
            (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Mean of Beta(a, b) by quadrature.
pub fn beta_mean_oracle(a: f64, b: f64) -> f64 {
    let shift = beta_shift(a, b);
    let z = integrate_ln(|_, dl, dr| (a - 1.0) * dl.ln() + (b - 1.0) * dr.ln() - shift, 0.0, 1.0, 1e-15);
    let m = integrate_ln(|_, dl, dr| a * dl.ln() + (b - 1.0) * dr.ln() - shift, 0.0, 1.0, 1e-15);
    m / z
}

/// Standard normal CDF from the Maclaurin series of erf; accurate for |z| ≤ 4.
pub fn normal_cdf_series(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term.abs() > 1e-20 * sum.abs().max(1e-300) || n < 5.0 {
        n += 1.0;
        term *= -x * x / n;
        sum += term / (2.0 * n + 1.0);
        if n > 500.0 {
            break;
        }
    }
    0.5 + sum / std::f64::consts::PI.sqrt()
}

/// Grid from lo to hi with the given width, extended geometrically to cover
/// every extra point, which are inserted as breakpoints too.
pub fn breakpoints(lo: f64, hi: f64, width: f64, extra: &[f64]) -> Vec<f64> {
    let mut pts = Vec::new();
    let mut x = lo;
    while x < hi {
        pts.push(x);
        x += width;
    }
    pts.push(hi);
    let min = extra.iter().copied().fold(lo, f64::min);
    let max = extra.iter().copied().fold(hi, f64::max);
    let (mut step, mut x) = (width, lo);
    while x > min {
        step *= 2.0;
        x -= step;
        pts.push(x);
    }
    let (mut step, mut x) = (width, hi);
    while x < max {
        step *= 2.0;
        x += step;
        pts.push(x);
    }
    pts.extend_from_slice(extra);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Splits ∫ |θ - t0|^power · exp(ln_g) at t0 into (below, above). `pts` must
/// contain t0. `ln_g` receives θ and its distances to the first and last
/// breakpoint. With `tail_scale` set, the half-lines beyond the outer
/// breakpoints are included.
pub fn split<G: Fn(f64, f64, f64) -> f64>(ln_g: G, pts: &[f64], tail_scale: Option<f64>, t0: f64, power: i32) -> (f64, f64) {
    let (first, last) = (pts[0], pts[pts.len() - 1]);
    let p = power as f64;
    let mut below = 0.0;
    let mut above = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let v = integrate_ln(
            |_, dl, dr| {
                let theta = if dl < dr { a + dl } else { b - dr };
                let dist = if a == t0 {
                    dl
                } else if b == t0 {
                    dr
                } else {
                    (theta - t0).abs()
                };
                let extra = if power == 0 { 0.0 } else { p * dist.ln() };
                ln_g(theta, (a - first) + dl, (last - b) + dr) + extra
            },
            a,
            b,
            1e-14,
        );
        if 0.5 * (a + b) < t0 {
            below += v;
        } else {
            above += v;
        }
    }
    if let Some(s) = tail_scale {
        let tail = |edge: f64, upper: bool| {
            half_line_ln(
                |theta| ln_g(theta, f64::NAN, f64::NAN) + if power == 0 { 0.0 } else { p * (theta - t0).abs().ln() },
                edge,
                s,
                upper,
                1e-14,
            )
        };
        below += tail(first, false);
        above += tail(last, true);
    }
    (below, above)
}

/// Largest value of ln_g over the breakpoints and their midpoints.
pub fn grid_max<G: Fn(f64) -> f64>(ln_g: G, pts: &[f64]) -> f64 {
    pts.windows(2)
        .flat_map(|w| [w[0], 0.5 * (w[0] + w[1])])
        .chain(pts.last().copied())
        .map(&ln_g)
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}
