//! Adaptive Gauss–Kronrod (7/15) quadrature used as an independent oracle.

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
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn recurse<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, lo, hi);
    if depth == 0 || err <= tol.max(64.0 * f64::EPSILON * value.abs()).max(1e-300) || hi - lo <= 1e-14 * (1.0 + lo.abs()) {
        return value;
    }
    let mid = 0.5 * (lo + hi);
    recurse(f, lo, mid, 0.5 * tol, depth - 1) + recurse(f, mid, hi, 0.5 * tol, depth - 1)
}

/// `∫_lo^hi f` to absolute tolerance `tol` (relative to the first estimate's
/// magnitude when that is larger than one).
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let (rough, _) = gk15(&f, lo, hi);
    recurse(&f, lo, hi, tol * rough.abs().max(1.0), 48)
}

/// Integrate over `[lo, hi]` split at the given breakpoints, for integrands
/// with jump discontinuities.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&x| x > lo && x < hi).collect();
    cuts.push(lo);
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2).map(|w| integrate(&f, w[0], w[1], tol)).sum()
}

