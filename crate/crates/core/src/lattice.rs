//! Finite-support innovations and the exact law of the scaled random walk
//! `ω(1) = Σ_{j≤n} ζ_j / √n`.
//!
//! Only the terminal value matters for every kernel in this crate (the
//! pricing kernels and the dual integrands are functions of `ω(1)` alone),
//! so paths are never materialized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{exp_m1_minus_x, logsumexp, neumaier_sum};

/// Default relative gap under which lattice points are merged.
pub const DEFAULT_MERGE_TOL: f64 = 1e-9;
/// Default cap on the number of lattice points.
pub const DEFAULT_LATTICE_CAP: usize = 2_000_000;

/// One support point of a [`FiniteRV`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// A mean-zero, unit-variance random variable with finitely many atoms,
/// sorted by value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRv")]
pub struct FiniteRV {
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawRv {
    atoms: Vec<Atom>,
}

impl TryFrom<RawRv> for FiniteRV {
    type Error = Error;
    fn try_from(raw: RawRv) -> Result<Self> {
        FiniteRV::new(raw.atoms)
    }
}

impl FiniteRV {
    /// Validates and sorts the atoms. Mean and variance are checked, not
    /// rescaled; see [`standardize`] for the rescaling helper.
    pub fn new(mut atoms: Vec<Atom>) -> Result<Self> {
        if atoms.len() < 2 {
            return Err(Error::InvalidRv(format!("need at least 2 atoms, got {}", atoms.len())));
        }
        for a in &atoms {
            if !a.value.is_finite() {
                return Err(Error::InvalidRv(format!("non-finite value {}", a.value)));
            }
            if !(a.prob > 0.0 && a.prob <= 1.0) {
                return Err(Error::InvalidRv(format!("probability {} outside (0, 1]", a.prob)));
            }
        }
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        if atoms.windows(2).any(|w| w[0].value == w[1].value) {
            return Err(Error::InvalidRv("duplicate atom values".into()));
        }
        let mass = neumaier_sum(atoms.iter().map(|a| a.prob));
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidRv(format!("probabilities sum to {mass}, not 1")));
        }
        let rv = FiniteRV { atoms };
        let (mean, var, _) = rv.moments();
        if mean.abs() > 1e-10 {
            return Err(Error::InvalidRv(format!("mean is {mean}, expected 0")));
        }
        if (var - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidRv(format!("variance is {var}, expected 1")));
        }
        Ok(rv)
    }

    /// Convenience constructor from `(value, prob)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(value, prob)| Atom { value, prob }).collect())
    }

    /// `±1` with probability 1/2 each.
    pub fn symmetric_binomial() -> Self {
        Self::from_pairs(&[(-1.0, 0.5), (1.0, 0.5)]).expect("valid by construction")
    }

    /// `2` with probability 1/5 and `-1/2` with probability 4/5; third moment 3/2.
    pub fn asymmetric_binomial() -> Self {
        Self::from_pairs(&[(-0.5, 0.8), (2.0, 0.2)]).expect("valid by construction")
    }

    /// `{-√2, 0, √2}` with probabilities `{1/4, 1/2, 1/4}`.
    pub fn trinomial() -> Self {
        let r = std::f64::consts::SQRT_2;
        Self::from_pairs(&[(-r, 0.25), (0.0, 0.5), (r, 0.25)]).expect("valid by construction")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].value
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].value
    }

    /// Support bound `K = max |ζ|`.
    pub fn support_bound(&self) -> f64 {
        self.min_value().abs().max(self.max_value().abs())
    }

    /// `(E ζ, Var ζ, E ζ³)`.
    pub fn moments(&self) -> (f64, f64, f64) {
        let mean = neumaier_sum(self.atoms.iter().map(|a| a.prob * a.value));
        let second = neumaier_sum(self.atoms.iter().map(|a| a.prob * a.value * a.value));
        let third = neumaier_sum(self.atoms.iter().map(|a| a.prob * a.value.powi(3)));
        (mean, second - mean * mean, third)
    }

    pub fn third_moment(&self) -> f64 {
        self.moments().2
    }

    /// `L_ζ(λ) = E[exp(λ ζ)]`. Overflows to `inf` for large `λ`; use
    /// [`FiniteRV::log_laplace`] there.
    pub fn laplace(&self, lambda: f64) -> f64 {
        self.log_laplace(lambda).exp()
    }

    /// `ln L_ζ(λ)`, accurate both for tiny `λ` (where `L - 1 ≈ λ²/2`) and for
    /// large `|λ|`.
    pub fn log_laplace(&self, lambda: f64) -> f64 {
        let k = self.support_bound();
        if (lambda * k).abs() < 0.5 {
            // ln(1 + Σ p (e^{λv} - 1 - λv) + λ E ζ); the linear part is summed
            // separately so the cancellation of the mean never happens in f64.
            let curv = neumaier_sum(self.atoms.iter().map(|a| a.prob * exp_m1_minus_x(lambda * a.value)));
            let lin = lambda * neumaier_sum(self.atoms.iter().map(|a| a.prob * a.value));
            (curv + lin).ln_1p()
        } else {
            let terms: Vec<f64> = self.atoms.iter().map(|a| a.prob.ln() + lambda * a.value).collect();
            logsumexp(&terms)
        }
    }
}

/// Affinely rescales arbitrary atoms (positive probabilities summing to one)
/// to mean 0 and variance 1.
pub fn standardize(atoms: &[Atom]) -> Result<FiniteRV> {
    let mass = neumaier_sum(atoms.iter().map(|a| a.prob));
    if atoms.is_empty() || (mass - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidRv(format!("probabilities sum to {mass}, not 1")));
    }
    let mean = neumaier_sum(atoms.iter().map(|a| a.prob * a.value));
    let var = neumaier_sum(atoms.iter().map(|a| a.prob * (a.value - mean).powi(2)));
    if !(var > 0.0) {
        return Err(Error::InvalidRv("degenerate distribution has zero variance".into()));
    }
    let sd = var.sqrt();
    FiniteRV::new(atoms.iter().map(|a| Atom { value: (a.value - mean) / sd, prob: a.prob }).collect())
}

/// `L_Y(λ) = e^{λ²/2}` for a standard normal `Y`.
pub fn gaussian_laplace(lambda: f64) -> f64 {
    gaussian_log_laplace(lambda).exp()
}

pub fn gaussian_log_laplace(lambda: f64) -> f64 {
    0.5 * lambda * lambda
}

/// One point of a [`LatticeDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub w: f64,
    pub prob: f64,
}

/// Exact law of `ω(1)` under `P_n`, with strictly increasing support.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeDistribution {
    pub n: usize,
    pub points: Vec<LatticePoint>,
    /// `1 - Σ prob`, kept as a record of accumulated rounding and underflow.
    pub mass_residual: f64,
}

impl LatticeDistribution {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(Σ prob, Σ prob·w, Σ prob·w²)`.
    pub fn moments(&self) -> (f64, f64, f64) {
        let p = &self.points;
        (
            neumaier_sum(p.iter().map(|x| x.prob)),
            neumaier_sum(p.iter().map(|x| x.prob * x.w)),
            neumaier_sum(p.iter().map(|x| x.prob * x.w * x.w)),
        )
    }

    /// `Σ prob·g(w)`; any non-finite `g(w)` is an error naming the atom.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.points.len());
        for pt in &self.points {
            let v = g(pt.w);
            if !v.is_finite() {
                return Err(Error::NonFinite { w: pt.w, value: v });
            }
            terms.push(pt.prob * v);
        }
        Ok(neumaier_sum(terms))
    }

    /// `ln Σ prob·exp(log_g(w))`, for integrands only representable in log
    /// form. `log_g = -inf` marks a zero integrand.
    pub fn log_expect<F: FnMut(f64) -> f64>(&self, mut log_g: F) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.points.len());
        for pt in &self.points {
            let v = log_g(pt.w);
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::NonFinite { w: pt.w, value: v });
            }
            terms.push(pt.prob.ln() + v);
        }
        Ok(logsumexp(&terms))
    }

    /// CSV with columns `w,prob`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w,prob\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.w, p.prob));
        }
        out
    }

    pub fn min_w(&self) -> f64 {
        self.points[0].w
    }

    pub fn max_w(&self) -> f64 {
        self.points[self.points.len() - 1].w
    }
}

/// Exact law of `Σ_{j≤n} ζ_j / √n` by iterated convolution, with the
/// default point cap.
pub fn terminal_distribution(rv: &FiniteRV, n: usize, merge_tol: f64) -> Result<LatticeDistribution> {
    terminal_distribution_capped(rv, n, merge_tol, DEFAULT_LATTICE_CAP)
}

/// As [`terminal_distribution`] with an explicit cap on the lattice size.
///
/// Convolution runs on the unscaled sums `Σ ζ_j`; the `1/√n` scaling is
/// applied once at the end. After each step, neighbouring sums whose gap is at
/// most `merge_tol · max(1, |s|)` are chained into one point (probabilities added, values
/// averaged with probability weights). Points whose probability underflows
/// to zero are dropped.
pub fn terminal_distribution_capped(
    rv: &FiniteRV,
    n: usize,
    merge_tol: f64,
    cap: usize,
) -> Result<LatticeDistribution> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(merge_tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("merge tolerance {merge_tol} must be >= 0")));
    }
    let mut cur: Vec<(f64, f64)> = rv.atoms.iter().map(|a| (a.value, a.prob)).collect();
    let mut scratch: Vec<(f64, f64)> = Vec::new();
    for step in 2..=n {
        scratch.clear();
        let needed = cur.len() * rv.atoms.len();
        if needed > cap.saturating_mul(rv.atoms.len()) {
            return Err(Error::LatticeTooLarge { points: needed, cap, step });
        }
        scratch.reserve(needed);
        for a in &rv.atoms {
            scratch.extend(cur.iter().map(|&(s, p)| (s + a.value, p * a.prob)));
        }
        scratch.sort_by(|x, y| x.0.total_cmp(&y.0));
        cur.clear();
        merge_sorted(&scratch, merge_tol, &mut cur);
        if cur.len() > cap {
            return Err(Error::LatticeTooLarge { points: cur.len(), cap, step });
        }
    }
    if cur.len() > cap {
        return Err(Error::LatticeTooLarge { points: cur.len(), cap, step: 1 });
    }
    let scale = 1.0 / (n as f64).sqrt();
    let points: Vec<LatticePoint> = cur.into_iter().map(|(s, p)| LatticePoint { w: s * scale, prob: p }).collect();
    let mass = neumaier_sum(points.iter().map(|p| p.prob));
    Ok(LatticeDistribution { n, points, mass_residual: 1.0 - mass })
}

fn merge_sorted(sorted: &[(f64, f64)], tol: f64, out: &mut Vec<(f64, f64)>) {
    // A cluster grows while each value sits within `tol` of the previous raw
    // value. Clusters of identical values keep that value exactly; others take
    // the probability-weighted mean.
    let mut iter = sorted.iter().filter(|(_, p)| *p > 0.0);
    let Some(&(s0, p0)) = iter.next() else { return };
    let (mut ws, mut wp, mut lo, mut last) = (s0 * p0, p0, s0, s0);
    let rep = |ws: f64, wp: f64, lo: f64, hi: f64| if lo == hi { lo } else { ws / wp };
    for &(s, p) in iter {
        if s - last <= tol * last.abs().max(1.0) {
            ws += s * p;
            wp += p;
        } else {
            out.push((rep(ws, wp, lo, last), wp));
            ws = s * p;
            wp = p;
            lo = s;
        }
        last = s;
    }
    out.push((rep(ws, wp, lo, last), wp));
}
