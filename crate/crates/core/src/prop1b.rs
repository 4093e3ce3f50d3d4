//! Conjugates whose dual value is infinite on part of the axis.
//!
//! `V0 = 1/f`, with `f` the density of the pricing kernel, makes
//! `E[V0(yZ); Z < z0]` diverge exactly when `y <= e^{-1/4}`. The series
//! `Σ y^{1-2^k} / (2^k (2^k - 1))` is finite with a finite derivative at
//! `y = 1` and infinite below it.

use crate::bsm::log_z_density;
use crate::conjugate::UtilitySpec;
use crate::error::{Error, Result};
use crate::numeric::{bisect, logsumexp};
use crate::quadrature::GaussLegendre;

/// Divergence threshold `e^{-1/4}` of the unshifted `V0`.
pub fn threshold() -> f64 {
    (-0.25f64).exp()
}

/// `ln V0(y) = ln sqrt(π/2) + ln y + 2 (ln y + 1/8)^2`.
pub fn log_v0(y: f64) -> f64 {
    let l = y.ln();
    0.5 * (std::f64::consts::PI / 2.0).ln() + l + 2.0 * (l + 0.125).powi(2)
}

pub fn v0(y: f64) -> f64 {
    log_v0(y).exp()
}

/// `V0'(y) = V0(y) (4 ln y + 3/2) / y`.
pub fn v0_prime(y: f64) -> f64 {
    v0(y) * (4.0 * y.ln() + 1.5) / y
}

/// Closed-form stationary point `e^{-3/8}` of `V0`.
pub fn v0_stationary_point_exact() -> f64 {
    (-0.375f64).exp()
}

/// Stationary point of `V0` located numerically: bisection on a central
/// difference of `ln V0` in `ln y`. `V0` decreases below it and increases
/// above it.
pub fn v0_stationary_point() -> f64 {
    let h = 1e-5;
    let d = |t: f64| (log_v0((t + h).exp()) - log_v0((t - h).exp())) / (2.0 * h);
    bisect(d, -3.0, 3.0, 1e-14).expect("derivative changes sign on [-3, 3]").exp()
}

/// Checks on a log grid of `(z0 · 1e-6, z0]` that `V0` is decreasing and
/// convex there.
pub fn v0_shape_ok(z0: f64) -> bool {
    let n = 400;
    let ys: Vec<f64> = (0..=n).map(|i| z0 * (1e-6f64).powf(1.0 - i as f64 / n as f64)).collect();
    let vs: Vec<f64> = ys.iter().map(|&y| v0(y)).collect();
    let decreasing = vs.windows(2).all(|w| w[1] < w[0]);
    let convex = (1..n).all(|i| {
        let s1 = (vs[i] - vs[i - 1]) / (ys[i] - ys[i - 1]);
        let s2 = (vs[i + 1] - vs[i]) / (ys[i + 1] - ys[i]);
        s2 >= s1
    });
    decreasing && convex
}

/// The largest `z0` on the grid `0.1, 0.09, ..., 0.01` that passes
/// [`v0_shape_ok`].
pub fn default_z0() -> f64 {
    (1..=10).rev().map(|k| k as f64 / 100.0).find(|&z| v0_shape_ok(z)).expect("V0 is convex and decreasing near zero")
}

/// Outcome of a truncated-integral scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Diverges,
    Converges,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Diverges => "diverges",
            Classification::Converges => "converges",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

/// Slope above which a scan is classified as diverging.
pub const DIVERGENCE_SLOPE: f64 = 0.05;
/// Relative Cauchy increment below which a scan is classified as converging.
pub const CAUCHY_TOL: f64 = 1e-6;

/// Truncated integrals `I(ε) = ∫_ε^{z0} V(yz) f(z) dz` for decreasing `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceScan {
    pub y: f64,
    pub z0: f64,
    pub epsilons: Vec<f64>,
    /// `ln I(ε)`; the integrals themselves overflow for strongly diverging `y`.
    pub log_integrals: Vec<f64>,
    /// Least-squares slope of `ln I` against `ln(1/ε)` over the second half
    /// of the scan.
    pub slope: f64,
    /// `(I(ε_last) - I(ε_prev)) / I(ε_last)`.
    pub last_increment: f64,
    pub classification: Classification,
}

impl DivergenceScan {
    pub fn integrals(&self) -> Vec<f64> {
        self.log_integrals.iter().map(|l| l.exp()).collect()
    }

    /// Rows `y,epsilon,I_eps,slope,classification`, without a header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (e, l) in self.epsilons.iter().zip(&self.log_integrals) {
            out.push_str(&format!("{},{},{},{},{}\n", self.y, e, l.exp(), self.slope, self.classification.as_str()));
        }
        out
    }
}

/// Default scan: `ε = z0 · 10^{-j}` for `j = 1..=299`, reaching about 1e-300.
pub fn default_epsilons(z0: f64) -> Vec<f64> {
    (1..=299).map(|j| z0 * 10f64.powi(-j)).collect()
}

/// Scans `E[V(yZ); ε < Z < z0]` as `ε` decreases.
///
/// Integration runs in `t = ln z` with a 16-point Gauss–Legendre rule on
/// pieces of length at most one, accumulated in log space.
pub fn divergence_scan(v_spec: &UtilitySpec, y: f64, z0: f64, epsilons: &[f64]) -> Result<DivergenceScan> {
    if !(y > 0.0 && z0 > 0.0) {
        return Err(Error::InvalidArgument(format!("y = {y} and z0 = {z0} must be positive")));
    }
    if epsilons.is_empty() || epsilons.windows(2).any(|w| !(w[1] < w[0])) || !(epsilons[0] < z0) {
        return Err(Error::InvalidArgument("epsilons must decrease strictly and start below z0".into()));
    }
    let gl = GaussLegendre::new(16);
    let mut err = None;
    let mut log_integrand = |t: f64| {
        let z = t.exp();
        match v_spec.log_v(y * z) {
            Ok(lv) => lv + log_z_density(z) + t,
            Err(e) => {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            }
        }
    };
    let mut log_piece = |a: f64, b: f64| {
        let pieces = ((b - a).ceil() as usize).max(1);
        let h = (b - a) / pieces as f64;
        let mut terms = Vec::with_capacity(pieces * gl.nodes.len());
        for p in 0..pieces {
            let lo = a + p as f64 * h;
            let (half, mid) = (0.5 * h, lo + 0.5 * h);
            for (&x, &w) in gl.nodes.iter().zip(&gl.weights) {
                terms.push((w * half).ln() + log_integrand(mid + half * x));
            }
        }
        logsumexp(&terms)
    };
    let mut logs = Vec::with_capacity(epsilons.len());
    let mut upper = z0.ln();
    let mut acc = f64::NEG_INFINITY;
    for &e in epsilons {
        let piece = log_piece(e.ln(), upper);
        acc = logsumexp(&[acc, piece]);
        logs.push(acc);
        upper = e.ln();
    }
    if let Some(e) = err {
        return Err(e);
    }
    let last_increment = if logs.len() >= 2 {
        let (a, b) = (logs[logs.len() - 2], logs[logs.len() - 1]);
        -(a - b).exp_m1()
    } else {
        f64::INFINITY
    };
    let half = logs.len() / 2;
    let xs: Vec<f64> = epsilons[half..].iter().map(|e| -e.ln()).collect();
    let slope = if xs.len() >= 2 { ls_slope(&xs, &logs[half..]) } else { f64::NAN };
    let classification = if last_increment < CAUCHY_TOL {
        Classification::Converges
    } else if slope > DIVERGENCE_SLOPE {
        Classification::Diverges
    } else {
        Classification::Inconclusive
    };
    Ok(DivergenceScan {
        y,
        z0,
        epsilons: epsilons.to_vec(),
        log_integrals: logs,
        slope,
        last_increment,
        classification,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `V^{y0}(y) = V((e^{-1/4} / y0) y)`: moves the divergence threshold of a
/// `V0`-type conjugate from `e^{-1/4}` to `y0`.
pub fn shift_v(v_spec: &UtilitySpec, y0: f64) -> Result<UtilitySpec> {
    if !(y0 > 0.0 && y0.is_finite()) {
        return Err(Error::InvalidArgument(format!("y0 = {y0} must be positive")));
    }
    v_spec.clone().with_dual_scale(threshold() / y0)
}

/// Partial sums past this size are reported as `+inf`.
const SERIES_CEILING: f64 = 1e300;

/// `v(y) = Σ_{k≥1} y^{1-2^k} / (2^k (2^k - 1))`; `+inf` when the partial sums
/// pass 1e300, which happens for every `y < 1`.
pub fn biii_v(y: f64) -> f64 {
    biii_sum(y, |k, ly| {
        let p = 2f64.powi(k);
        (1.0 - p) * ly - p.ln() - (p - 1.0).ln()
    })
}

/// `v'(y) = -Σ_{k≥1} y^{-2^k} / 2^k`; `-inf` below `y = 1`.
pub fn biii_vprime(y: f64) -> f64 {
    -biii_sum(y, |k, ly| {
        let p = 2f64.powi(k);
        -p * ly - p.ln()
    })
}

/// Sums positive terms given in log form until they drop below 1e-18 of the
/// running sum (terms then shrink at least geometrically, so the neglected
/// tail is of the same size) or the sum passes the ceiling.
fn biii_sum<F: Fn(i32, f64) -> f64>(y: f64, log_term: F) -> f64 {
    let ly = y.ln();
    let mut acc = f64::NEG_INFINITY;
    for k in 1..1020 {
        let lt = log_term(k, ly);
        acc = logsumexp(&[acc, lt]);
        if acc > SERIES_CEILING.ln() {
            return f64::INFINITY;
        }
        if ly >= 0.0 && lt < acc - 41.5 {
            break;
        }
    }
    acc.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsm::z_density;

    #[test]
    fn v0_is_the_reciprocal_density() {
        for y in [0.1, 0.5, 1.0, 10.0] {
            assert!((v0(y) * z_density(y) - 1.0).abs() < 1e-12);
        }
        let f1 = 2.0 * (-(0.25f64).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v0(1.0) - 1.0 / f1).abs() < 1e-12);
        assert!((v0(1.0) - 1.293_098_6).abs() < 1e-6);
    }

    #[test]
    fn stationary_point_is_at_minus_three_eighths() {
        let y = v0_stationary_point();
        assert!((y - 0.687_289).abs() < 1e-6);
        assert!((y - v0_stationary_point_exact()).abs() < 1e-9);
        assert!(v0_prime(0.6) < 0.0 && v0_prime(0.8) > 0.0);
    }

    #[test]
    fn default_z0_passes_the_shape_check() {
        assert_eq!(default_z0(), 0.1);
        assert!(!v0_shape_ok(0.9));
    }

    #[test]
    fn truncated_integrals_match_closed_form() {
        // V0(yz) f(z) = y exp(ln y / 2 + 2 ln² y) z^{4 ln y}.
        let spec = UtilitySpec::prop1b_v0(0.1).unwrap();
        for y in [0.5, 0.75, 0.8] {
            let eps = [1e-2, 1e-4, 1e-8];
            let scan = divergence_scan(&spec, y, 0.1, &eps).unwrap();
            let l = f64::ln(y);
            let c = y * (0.5 * l + 2.0 * l * l).exp();
            let p = 4.0 * l + 1.0;
            for (e, got) in eps.iter().zip(scan.integrals()) {
                let want = c * (0.1f64.powf(p) - e.powf(p)) / p;
                assert!((got / want - 1.0).abs() < 1e-10, "y {y} eps {e}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn density_ratio_is_a_power_law() {
        let y: f64 = 0.5;
        let l = y.ln();
        let k = (0.5 * l - 2.0 * l * l).exp();
        for w in [1e-3, 1e-2, 1e-1] {
            let r = z_density(w / y) / (y * z_density(w)) * w.powf(-4.0 * l);
            assert!((r / k - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scan_brackets_the_threshold() {
        let spec = UtilitySpec::prop1b_v0(0.1).unwrap();
        let eps = default_epsilons(0.1);
        let cls = |y| divergence_scan(&spec, y, 0.1, &eps).unwrap().classification;
        assert_eq!(cls(0.75), Classification::Diverges);
        assert_eq!(cls(0.80), Classification::Converges);
        let shifted = shift_v(&spec, 1.0).unwrap();
        let cls = |y| divergence_scan(&shifted, y, 0.1, &eps).unwrap().classification;
        assert_eq!(cls(0.96), Classification::Diverges);
        assert_eq!(cls(1.04), Classification::Converges);
    }

    #[test]
    fn shift_round_trips() {
        let spec = UtilitySpec::prop1b_v0(0.1).unwrap();
        assert_eq!(shift_v(&spec, threshold()).unwrap().dual_scale, 1.0);
        let there = shift_v(&spec, 0.3).unwrap();
        let back = shift_v(&there, threshold() * threshold() / 0.3).unwrap();
        for y in [0.01, 0.05] {
            assert!((back.v(y).unwrap() / spec.v(y).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn biii_series_values() {
        assert!((biii_vprime(1.0) + 1.0).abs() < 1e-12);
        assert!((biii_v(1.0) - 0.606_695).abs() < 1e-6);
        assert!(biii_v(0.99).is_infinite());
        assert!(biii_v(1.01).is_finite());
        assert!(biii_vprime(0.99) == f64::NEG_INFINITY);
        // -v' against central differences on [1, 10].
        for y in [1.5, 2.0, 5.0, 10.0] {
            let h = 1e-5 * y;
            let fd = (biii_v(y + h) - biii_v(y - h)) / (2.0 * h);
            assert!((fd - biii_vprime(y)).abs() < 1e-8 * (1.0 + fd.abs()));
        }
    }
}
