//! Small numerical kernels shared by the modules: log-domain sums,
//! adaptive Gauss-Kronrod quadrature, bracketed scalar root finding and
//! golden-section search.

use crate::error::{Error, Result};

/// `log(e^a + e^b)` without overflow. `-inf` is the additive identity.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `log(sum e^x_i)` with a single max-shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY || hi.is_infinite() {
        return hi;
    }
    hi + xs.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// Error-free transformation `a + b = s + e` (Knuth's TwoSum).
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
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

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod quadrature with global bisection of the worst
/// subinterval. Returns `(integral, error_estimate)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut pieces: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = gk15(&mut f, a, b);
    pieces.push((a, b, v, e));
    let mut total = v;
    let mut err = e;
    for _ in 0..4000 {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, v0, e0) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            pieces.push((lo, hi, v0, 0.0));
            continue;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    // re-sum to drop the drift of the running totals
    let total: f64 = pieces.iter().map(|p| p.2).sum();
    let err: f64 = pieces.iter().map(|p| p.3).sum();
    (total, err)
}

/// Bisection on a sign-changing bracket until the interval width drops below
/// `width` or machine resolution is reached. Returns the final bracket.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, width: f64) -> Result<(f64, f64)> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok((lo, lo));
    }
    if fhi == 0.0 {
        return Ok((hi, hi));
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Bracketing(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    while (hi - lo).abs() > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Illinois-modified regula falsi. Stops when `|f| <= ftol`, when the bracket
/// collapses to `xtol`, or after `max_iter` evaluations.
pub fn illinois<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    ftol: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa.signum() == fb.signum() && fa != 0.0 && fb != 0.0 {
        return Err(Error::Bracketing(format!(
            "no sign change on [{a}, {b}]: f = ({fa}, {fb})"
        )));
    }
    if fa.abs() <= ftol {
        return Ok((a, fa));
    }
    if fb.abs() <= ftol {
        return Ok((b, fb));
    }
    let mut side = 0i8;
    for _ in 0..max_iter {
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c.is_finite() && c > a.min(b) && c < a.max(b) {
            c
        } else {
            0.5 * (a + b)
        };
        let fc = f(c)?;
        if fc.abs() <= ftol || (b - a).abs() <= xtol {
            return Ok((c, fc));
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    let (x, fx) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    Ok((x, fx))
}

/// Golden-section search for an extremum of `f` on `[a, b]`.
///
/// `maximize` selects the direction. At most `budget` evaluations are spent;
/// iteration stops early once the bracket is narrower than `width`.
/// Returns the final bracket `(left, best, right)` as `(x, f(x))` pairs.
pub fn golden_section<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    maximize: bool,
    width: f64,
    budget: usize,
) -> Result<[(f64, f64); 3]> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let sign = if maximize { 1.0 } else { -1.0 };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut used = 2;
    while (b - a).abs() > width && used < budget {
        if sign * fc >= sign * fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        used += 1;
    }
    let (best, fbest, other, fother) = if sign * fc >= sign * fd {
        (c, fc, d, fd)
    } else {
        (d, fd, c, fc)
    };
    let (left, right) = if other < best {
        ((other, fother), (b, f64::NAN))
    } else {
        ((a, f64::NAN), (other, fother))
    };
    Ok([left, (best, fbest), right])
}

/// `n` points geometrically spaced from `lo` to `hi` inclusive.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `n` points uniformly spaced from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}
