//! Esscher martingale measure of the `n`-step market.
//!
//! The density `Z_n = exp(-a_n ω(1) - b_n)` factorizes into i.i.d. per-step
//! factors `exp(-a_n ζ_j/√n - b_n/n)`, so both defining conditions reduce to
//! scalar equations in the Laplace transform of `ζ`:
//!
//! * martingale: `L((1 - a)/√n) = L(-a/√n)`,
//! * normalization: `b_n = n ln L(-a_n/√n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::FiniteRV;
use crate::numeric::bisect;

/// Root tolerance for `a_n`.
pub const A_TOL: f64 = 1e-13;

/// `(n, a_n, b_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsscherParams {
    pub n: usize,
    pub a: f64,
    pub b: f64,
}

impl EsscherParams {
    /// `Z_n(w) = exp(-a_n w - b_n)`.
    pub fn z_n(&self, w: f64) -> f64 {
        self.log_z_n(w).exp()
    }

    pub fn log_z_n(&self, w: f64) -> f64 {
        -self.a * w - self.b
    }
}

/// `g(a) = ln L((1 - a)/√n) - ln L(-a/√n)`, strictly decreasing in `a`.
pub fn martingale_gap(rv: &FiniteRV, n: usize, a: f64) -> f64 {
    let s = (n as f64).sqrt();
    rv.log_laplace((1.0 - a) / s) - rv.log_laplace(-a / s)
}

/// Solves for `(a_n, b_n)`: bisection on `g` from the bracket `[-1, 2]`,
/// widened by doubling until `g` changes sign.
pub fn solve_esscher(rv: &FiniteRV, n: usize) -> Result<EsscherParams> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let g = |a: f64| martingale_gap(rv, n, a);
    let (mut lo, mut hi) = (-1.0, 2.0);
    let mut width = hi - lo;
    for _ in 0..60 {
        if g(lo) > 0.0 && g(hi) < 0.0 {
            break;
        }
        width *= 2.0;
        lo = 0.5 - width / 2.0;
        hi = 0.5 + width / 2.0;
    }
    if !(g(lo) >= 0.0 && g(hi) <= 0.0) {
        return Err(Error::Bracket { lo, hi });
    }
    let a = bisect(g, lo, hi, A_TOL)?;
    let b = n as f64 * rv.log_laplace(-a / (n as f64).sqrt());
    Ok(EsscherParams { n, a, b })
}

/// Newton refinement of `a_n` from `start`, with a central-difference
/// derivative. Used only to cross-check the bisection root.
pub fn newton_refine(rv: &FiniteRV, n: usize, start: f64) -> f64 {
    let mut a = start;
    for _ in 0..50 {
        let h = 1e-5;
        let d = (martingale_gap(rv, n, a + h) - martingale_gap(rv, n, a - h)) / (2.0 * h);
        let step = martingale_gap(rv, n, a) / d;
        a -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    a
}

/// Two-term expansion `a_n ≈ 1/2 + E[ζ³] / (24 √n)`.
pub fn asymptotic_a(rv: &FiniteRV, n: usize) -> f64 {
    0.5 + rv.third_moment() / (24.0 * (n as f64).sqrt())
}

/// `√n (a_n - asymptotic_a)`.
pub fn scaled_residual(rv: &FiniteRV, p: &EsscherParams) -> f64 {
    (p.n as f64).sqrt() * (p.a - asymptotic_a(rv, p.n))
}

/// CSV with columns `n,a_n,b_n,asymptotic_a,scaled_residual`.
pub fn esscher_csv(rv: &FiniteRV, params: &[EsscherParams]) -> String {
    let mut out = String::from("n,a_n,b_n,asymptotic_a,scaled_residual\n");
    for p in params {
        out.push_str(&format!("{},{},{},{},{}\n", p.n, p.a, p.b, asymptotic_a(rv, p.n), scaled_residual(rv, p)));
    }
    out
}

/// A bound `C` with `C^{-1} <= Z_n / Z <= C` on every lattice point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBound {
    pub c: f64,
    pub log_c: f64,
    /// `max_n |a_n - 1/2| K √n + |b_n - 1/8|`, with `K` the support bound.
    pub log_envelope: f64,
}

/// `C = exp(max_{n, w} |ln Z_n(w) - ln Z(w)|)` over `n_list`.
///
/// `ln Z_n - ln Z = -(a_n - 1/2) w - (b_n - 1/8)` is affine in `w`, so the
/// maximum over the lattice sits at its end points `√n min ζ` and `√n max ζ`.
pub fn ratio_bound_c(rv: &FiniteRV, n_list: &[usize]) -> Result<RatioBound> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("n list must be nonempty".into()));
    }
    let k = rv.support_bound();
    let (mut log_c, mut env) = (0.0f64, 0.0f64);
    for &n in n_list {
        let p = solve_esscher(rv, n)?;
        let s = (n as f64).sqrt();
        let gap = |w: f64| (-(p.a - 0.5) * w - (p.b - 0.125)).abs();
        log_c = log_c.max(gap(s * rv.min_value())).max(gap(s * rv.max_value()));
        env = env.max((p.a - 0.5).abs() * k * s + (p.b - 0.125).abs());
    }
    Ok(RatioBound { c: log_c.exp(), log_c, log_envelope: env })
}
