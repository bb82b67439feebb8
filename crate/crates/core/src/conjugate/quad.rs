//! Globally adaptive Gauss–Kronrod (7/15) quadrature over a vector-valued
//! integrand of fixed small dimension.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment<const D: usize> {
    a: f64,
    b: f64,
    value: [f64; D],
    error: f64,
}

fn gk15<const D: usize, F: FnMut(f64) -> [f64; D]>(f: &mut F, a: f64, b: f64) -> Segment<D> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = [0.0; D];
    let mut gauss = [0.0; D];
    for d in 0..D {
        kronrod[d] = WGK[7] * fc[d];
        gauss[d] = WG[3] * fc[d];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for d in 0..D {
            let s = f1[d] + f2[d];
            kronrod[d] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[d] += WG[j / 2] * s;
            }
        }
    }
    let mut error: f64 = 0.0;
    for d in 0..D {
        kronrod[d] *= half;
        gauss[d] *= half;
        error = error.max((kronrod[d] - gauss[d]).abs());
    }
    Segment {
        a,
        b,
        value: kronrod,
        error,
    }
}

/// Integrates `f` over the partition given by `breaks` (ascending, at least
/// two points), bisecting the worst segment until the summed error estimate
/// drops below `abs_tol` or `max_segments` is reached.
pub(crate) fn integrate<const D: usize, F: FnMut(f64) -> [f64; D]>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    max_segments: usize,
) -> [f64; D] {
    let mut segments: Vec<Segment<D>> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&mut f, w[0], w[1]))
        .collect();
    loop {
        let total_error: f64 = segments.iter().map(|s| s.error).sum();
        if total_error <= abs_tol || segments.len() >= max_segments {
            break;
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // Segment cannot be split further in floating point.
            segments.push(Segment { error: 0.0, ..seg });
            continue;
        }
        segments.push(gk15(&mut f, seg.a, mid));
        segments.push(gk15(&mut f, mid, seg.b));
    }
    let mut total = [0.0; D];
    for s in &segments {
        for (t, v) in total.iter_mut().zip(s.value) {
            *t += v;
        }
    }
    total
}
