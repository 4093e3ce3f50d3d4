//! Small numerical helpers shared by the kernels: stable log-space sums,
//! compensated summation and one-dimensional searches.

use crate::error::{Error, Result};

/// Inverse golden ratio, `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// `log(sum(exp(xs)))` without overflow. Empty input gives `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s = neumaier_sum(xs.iter().map(|&x| (x - m).exp()));
    m + s.ln()
}

/// `log(exp(a) + exp(b))`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Neumaier-compensated sum, evaluated in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `exp(x) - 1 - x`, accurate for small `|x|` where the direct form cancels.
pub fn exp_m1_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Taylor series from x^2/2; 14 terms reach f64 precision at |x| = 0.1.
        let mut term = x * x / 2.0;
        let mut acc = term;
        for k in 3..=16 {
            term *= x / k as f64;
            acc += term;
        }
        acc
    } else {
        x.exp_m1() - x
    }
}

/// Maximize a unimodal function on `[lo, hi]` by golden-section search.
///
/// Stops when the bracket is narrower than `tol`; returns the midpoint of the
/// final bracket and the function value there.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // 200 iterations shrink any finite bracket far below f64 resolution.
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimize a unimodal function on `[lo, hi]`.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (x, v) = golden_max(|t| -f(t), lo, hi, tol);
    (x, -v)
}

/// Minimize a unimodal function of one real variable over the whole line.
///
/// Starts at `start` with unit steps and doubles the step in the descending
/// direction until the function turns up, then hands the bracket to
/// golden-section search. Non-finite values or more than `max_doublings`
/// doublings are reported as [`Error::Unbounded`].
pub fn minimize_unbounded<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    tol: f64,
    max_doublings: usize,
) -> Result<(f64, f64)> {
    let f0 = f(start);
    if !f0.is_finite() {
        return Err(Error::Unbounded { log_y: start });
    }
    let fr = f(start + 1.0);
    let fl = f(start - 1.0);
    let dir = if fr < f0 {
        1.0
    } else if fl < f0 {
        -1.0
    } else {
        return Ok(golden_min(f, start - 1.0, start + 1.0, tol));
    };
    let mut prev = start;
    let mut cur = start + dir;
    let mut fcur = if dir > 0.0 { fr } else { fl };
    let mut step = 1.0;
    for _ in 0..max_doublings {
        step *= 2.0;
        let next = cur + dir * step;
        let fnext = f(next);
        if !fnext.is_finite() {
            return Err(Error::Unbounded { log_y: next });
        }
        if fnext >= fcur {
            let (lo, hi) = if dir > 0.0 { (prev, next) } else { (next, prev) };
            return Ok(golden_min(f, lo, hi, tol));
        }
        prev = cur;
        cur = next;
        fcur = fnext;
    }
    Err(Error::Unbounded { log_y: cur })
}

/// Bisection for a root of `f` on `[lo, hi]` where `f(lo)` and `f(hi)` have
/// opposite signs. Stops at `|hi - lo| <= tol` or when the midpoint no longer
/// moves.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(Error::Bracket { lo, hi });
    }
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `n` points from `lo` to `hi`, equally spaced in `log`.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > 0.0 && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
