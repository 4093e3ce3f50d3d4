//! Utility families and their convex conjugates.
//!
//! A [`UtilitySpec`] carries a primal utility `U` together with its conjugate
//! `V(y) = sup_x [U(x) - xy]`, the marginal utility `U'`, its inverse `I` and
//! `V' = -I`. Families with a closed-form conjugate evaluate directly; the
//! others go through a monotone root find on the marginal.
//!
//! Two adjustments apply on top of the base family:
//!
//! * `shift = c` replaces `U` by `U - c` (so `V` by `V - c`). Elasticities and
//!   every dual quantity are computed after the shift.
//! * `dual_scale = s` replaces `V(y)` by `V(s y)`, which turns `U(x)` into
//!   `U(x / s)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, logsumexp, minimize_unbounded};
use crate::prop1b;

/// Tolerance, in `ln y`, for golden-section conjugate searches.
pub const CONJUGATE_TOL: f64 = 1e-10;
/// Cap on bracket doublings in conjugate searches.
pub const MAX_DOUBLINGS: usize = 1000;

/// One term `exp(log_beta) · y^(-alpha)` of a series conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub alpha: f64,
    pub log_beta: f64,
}

/// The base utility family, before shift and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `U(x) = x^γ / γ`, `γ ∈ (0, 1)`.
    Crra { gamma: f64 },
    /// `V(y) = β y^(-α)`.
    PowerConjugate { alpha: f64, beta: f64 },
    /// `V(y) = Σ β_k y^(-α_k)` with strictly increasing `α_k`.
    SeriesConjugate { terms: Vec<SeriesTerm> },
    /// The reciprocal of the density of the pricing kernel on `(0, z0]`,
    /// continued to a convex decreasing function beyond `z0`.
    Prop1bV0 { z0: f64 },
    /// `U` tabulated at increasing wealth levels; interpolated by a
    /// monotone cubic in `ln x`.
    NumericU { x: Vec<f64>, u: Vec<f64> },
}

#[derive(Deserialize)]
struct RawSpec {
    #[serde(flatten)]
    family: Family,
    #[serde(default)]
    shift: f64,
    #[serde(default = "one")]
    dual_scale: f64,
}

fn one() -> f64 {
    1.0
}

/// A utility function with its conjugate; see the module docs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct UtilitySpec {
    #[serde(flatten)]
    pub family: Family,
    pub shift: f64,
    pub dual_scale: f64,
    #[serde(skip)]
    table: Option<Arc<MonotoneCubic>>,
}

impl TryFrom<RawSpec> for UtilitySpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        UtilitySpec::new(raw.family)?.with_shift(raw.shift)?.with_dual_scale(raw.dual_scale)
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

impl UtilitySpec {
    /// Validates the family parameters.
    pub fn new(family: Family) -> Result<Self> {
        let mut table = None;
        match &family {
            Family::Crra { gamma } => {
                if !(*gamma > 0.0 && *gamma < 1.0) {
                    return Err(invalid(format!("CRRA gamma {gamma} must lie in (0, 1)")));
                }
            }
            Family::PowerConjugate { alpha, beta } => {
                if !(*alpha > 0.0 && alpha.is_finite() && *beta > 0.0 && beta.is_finite()) {
                    return Err(invalid(format!("power conjugate needs alpha, beta > 0, got {alpha}, {beta}")));
                }
            }
            Family::SeriesConjugate { terms } => {
                if terms.is_empty() {
                    return Err(invalid("series conjugate needs at least one term".into()));
                }
                for t in terms {
                    if !(t.alpha > 0.0 && t.alpha.is_finite() && t.log_beta.is_finite()) {
                        return Err(invalid(format!("bad series term {t:?}")));
                    }
                }
                if terms.windows(2).any(|w| w[1].alpha <= w[0].alpha) {
                    return Err(invalid("series exponents must be strictly increasing".into()));
                }
            }
            Family::Prop1bV0 { z0 } => {
                if !(*z0 > 0.0 && *z0 < prop1b::v0_stationary_point_exact()) {
                    return Err(invalid(format!("z0 = {z0} must lie in (0, e^(-3/8)) where V0 is decreasing")));
                }
            }
            Family::NumericU { x, u } => {
                table = Some(Arc::new(MonotoneCubic::from_utility(x, u)?));
            }
        }
        Ok(Self { family, shift: 0.0, dual_scale: 1.0, table })
    }

    pub fn crra(gamma: f64) -> Result<Self> {
        Self::new(Family::Crra { gamma })
    }

    pub fn power_conjugate(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::PowerConjugate { alpha, beta })
    }

    pub fn series(terms: Vec<SeriesTerm>) -> Result<Self> {
        Self::new(Family::SeriesConjugate { terms })
    }

    pub fn prop1b_v0(z0: f64) -> Result<Self> {
        Self::new(Family::Prop1bV0 { z0 })
    }

    pub fn numeric_u(x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        Self::new(Family::NumericU { x, u })
    }

    /// Subtracts `c` from `U` (and from `V`), on top of any earlier shift.
    pub fn with_shift(mut self, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(invalid(format!("shift {c} must be finite")));
        }
        self.shift += c;
        Ok(self)
    }

    /// Rescales the dual argument: `V(y)` becomes `V(s y)`, composed with any
    /// earlier scaling.
    pub fn with_dual_scale(mut self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(format!("dual scale {s} must be positive")));
        }
        self.dual_scale *= s;
        Ok(self)
    }

    /// Short family name used in reports.
    pub fn family_id(&self) -> &'static str {
        match self.family {
            Family::Crra { .. } => "crra",
            Family::PowerConjugate { .. } => "power_conjugate",
            Family::SeriesConjugate { .. } => "series_conjugate",
            Family::Prop1bV0 { .. } => "prop1b_v0",
            Family::NumericU { .. } => "numeric_u",
        }
    }

    /// `γ` when this is an unshifted, unscaled CRRA utility.
    pub fn crra_gamma(&self) -> Option<f64> {
        match self.family {
            Family::Crra { gamma } if self.shift == 0.0 && self.dual_scale == 1.0 => Some(gamma),
            _ => None,
        }
    }

    /// The conjugate as a finite sum of `(alpha, log_beta)` power terms, when
    /// it is one (CRRA, power and series families without a shift).
    pub fn power_terms(&self) -> Option<Vec<SeriesTerm>> {
        if self.shift != 0.0 {
            return None;
        }
        let ls = self.dual_scale.ln();
        let base = match &self.family {
            Family::Crra { gamma } => {
                vec![SeriesTerm { alpha: gamma / (1.0 - gamma), log_beta: ((1.0 - gamma) / gamma).ln() }]
            }
            Family::PowerConjugate { alpha, beta } => vec![SeriesTerm { alpha: *alpha, log_beta: beta.ln() }],
            Family::SeriesConjugate { terms } => terms.clone(),
            _ => return None,
        };
        Some(base.into_iter().map(|t| SeriesTerm { alpha: t.alpha, log_beta: t.log_beta - t.alpha * ls }).collect())
    }

    // ---- public evaluators ----

    /// `U(x)`.
    pub fn u(&self, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        Ok(self.base_u(x / self.dual_scale)? - self.shift)
    }

    /// `U'(x)`.
    pub fn u_prime(&self, x: f64) -> Result<f64> {
        check_positive("x", x)?;
        Ok(self.base_u_prime(x / self.dual_scale)? / self.dual_scale)
    }

    /// `I(y) = (U')^{-1}(y) = -V'(y)`.
    pub fn inverse_marginal(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        let s = self.dual_scale;
        Ok(s * self.base_i(s * y)?)
    }

    /// `V(y)`.
    pub fn v(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        Ok(self.base_v(self.dual_scale * y)? - self.shift)
    }

    /// `V'(y)`.
    pub fn v_prime(&self, y: f64) -> Result<f64> {
        Ok(-self.inverse_marginal(y)?)
    }

    /// `ln V(y)`; fails when `V(y) <= 0`. Power-type families never leave
    /// log space, so this works where `V` itself overflows.
    pub fn log_v(&self, y: f64) -> Result<f64> {
        check_positive("y", y)?;
        let sy = self.dual_scale * y;
        if self.shift == 0.0 {
            if let Some(lv) = self.base_log_v(sy) {
                return Ok(lv);
            }
        }
        let v = self.v(y)?;
        if v > 0.0 {
            Ok(v.ln())
        } else {
            Err(Error::NonPositiveDual { y, value: v })
        }
    }

    // ---- base family (shift 0, scale 1) ----

    fn base_log_v(&self, y: f64) -> Option<f64> {
        match &self.family {
            Family::Crra { gamma } => Some(((1.0 - gamma) / gamma).ln() - gamma / (1.0 - gamma) * y.ln()),
            Family::PowerConjugate { alpha, beta } => Some(beta.ln() - alpha * y.ln()),
            Family::SeriesConjugate { terms } => Some(series_log_value(terms, y)),
            Family::Prop1bV0 { z0 } if y <= *z0 => Some(prop1b::log_v0(y)),
            _ => None,
        }
    }

    /// `ln(-V'(y))` where available in closed form.
    fn base_log_neg_vp(&self, y: f64) -> Option<f64> {
        let ly = y.ln();
        match &self.family {
            Family::Crra { gamma } => Some(ly / (gamma - 1.0)),
            Family::PowerConjugate { alpha, beta } => Some(alpha.ln() + beta.ln() - (alpha + 1.0) * ly),
            Family::SeriesConjugate { terms } => {
                let xs: Vec<f64> = terms.iter().map(|t| t.alpha.ln() + t.log_beta - (t.alpha + 1.0) * ly).collect();
                Some(logsumexp(&xs))
            }
            Family::Prop1bV0 { z0 } => {
                if y <= *z0 {
                    // -V0'(y) = V0(y) · -(4 ln y + 3/2) / y, positive below e^(-3/8).
                    Some(prop1b::log_v0(y) + (-(4.0 * ly + 1.5)).ln() - ly)
                } else {
                    let (_, b, h) = v0_extension(*z0);
                    Some(b.ln() - 2.0 * (y - z0 + h).ln())
                }
            }
            Family::NumericU { .. } => None,
        }
    }

    fn base_v(&self, y: f64) -> Result<f64> {
        match &self.family {
            Family::Prop1bV0 { z0 } if y > *z0 => {
                let (a, b, h) = v0_extension(*z0);
                Ok(a + b / (y - z0 + h))
            }
            Family::NumericU { .. } => {
                let x = self.base_i(y)?;
                Ok(self.base_u(x)? - x * y)
            }
            _ => Ok(self.base_log_v(y).expect("closed-form family").exp()),
        }
    }

    fn base_i(&self, y: f64) -> Result<f64> {
        match self.base_log_neg_vp(y) {
            Some(l) => Ok(l.exp()),
            None => {
                let table = self.table.as_ref().expect("numeric family has a table");
                table.inverse_marginal(y)
            }
        }
    }

    fn base_u(&self, x: f64) -> Result<f64> {
        match &self.family {
            Family::Crra { gamma } => Ok(x.powf(*gamma) / gamma),
            Family::PowerConjugate { alpha, beta } => Ok(power_utility(*alpha, *beta, x)),
            Family::NumericU { .. } => self.table.as_ref().expect("table").value(x),
            _ => {
                let y = self.base_marginal_root(x)?;
                Ok(self.base_v(y)? + x * y)
            }
        }
    }

    fn base_u_prime(&self, x: f64) -> Result<f64> {
        match &self.family {
            Family::Crra { gamma } => Ok(x.powf(gamma - 1.0)),
            Family::PowerConjugate { alpha, beta } => Ok((alpha * beta / x).powf(1.0 / (1.0 + alpha))),
            Family::NumericU { .. } => self.table.as_ref().expect("table").derivative(x),
            _ => self.base_marginal_root(x),
        }
    }

    /// `y` with `-V'(y) = x`, by bracketing and bisection in `ln y`.
    fn base_marginal_root(&self, x: f64) -> Result<f64> {
        let lx = x.ln();
        let g = |t: f64| self.base_log_neg_vp(t.exp()).expect("closed-form marginal") - lx;
        Ok(root_decreasing(g, 0.0, 1e-15)?.exp())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must be positive and finite")))
    }
}

/// `ln Σ exp(log_beta_k) y^(-alpha_k)`.
pub fn series_log_value(terms: &[SeriesTerm], y: f64) -> f64 {
    let ly = y.ln();
    let xs: Vec<f64> = terms.iter().map(|t| t.log_beta - t.alpha * ly).collect();
    logsumexp(&xs)
}

/// Hyperbola `A + B / (y - z0 + h)` continuing `V0` past `z0` with matching
/// value and slope; `h = z0`. Returns `(A, B, h)`.
fn v0_extension(z0: f64) -> (f64, f64, f64) {
    let v0 = prop1b::v0(z0);
    let s0 = prop1b::v0_prime(z0);
    let h = z0;
    let b = -s0 * h * h;
    (v0 + s0 * h, b, h)
}

/// Root of a decreasing function, bracketing outward from `t0` with doubling
/// steps and finishing with bisection to `tol`.
pub(crate) fn root_decreasing<F: FnMut(f64) -> f64>(mut f: F, t0: f64, tol: f64) -> Result<f64> {
    let f0 = f(t0);
    if f0 == 0.0 {
        return Ok(t0);
    }
    if f0.is_nan() {
        return Err(Error::Bracket { lo: t0, hi: t0 });
    }
    let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
    let (mut a, mut fa, mut step) = (t0, f0, 1.0);
    for _ in 0..64 {
        let b = a + dir * step;
        let fb = f(b);
        if fb.is_nan() {
            break;
        }
        if fb == 0.0 || fb.signum() != fa.signum() {
            return bisect(&mut f, a.min(b), a.max(b), tol);
        }
        a = b;
        fa = fb;
        step *= 2.0;
    }
    let (lo, hi) = if dir > 0.0 { (t0, a) } else { (a, t0) };
    Err(Error::Bracket { lo, hi })
}

/// `V(y)`, closed form where the family allows it.
pub fn conjugate_v(u: &UtilitySpec, y: f64) -> Result<f64> {
    u.v(y)
}

/// Value and minimizer of `inf_y [V(y) + x y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePoint {
    pub value: f64,
    pub y_star: f64,
}

/// `U(x) = inf_{y>0} [V(y) + x y]` with `V` taken from the spec, computed by
/// golden-section search in `ln y` regardless of any closed form.
pub fn conjugate_u(v_spec: &UtilitySpec, x: f64) -> Result<ConjugatePoint> {
    check_positive("x", x)?;
    conjugate_u_with(|y| v_spec.v(y).unwrap_or(f64::NAN), x, 0.0)
}

/// As [`conjugate_u`] for an arbitrary convex decreasing `v`, starting the
/// bracket search at `ln y = log_y_start`.
pub fn conjugate_u_with<F: Fn(f64) -> f64>(v: F, x: f64, log_y_start: f64) -> Result<ConjugatePoint> {
    let (t, value) = minimize_unbounded(|t| v(t.exp()) + x * t.exp(), log_y_start, CONJUGATE_TOL, MAX_DOUBLINGS)?;
    Ok(ConjugatePoint { value, y_star: t.exp() })
}

/// `U_{α,β}(x) = ((1+α) / α^{α/(1+α)}) β^{1/(1+α)} x^{α/(1+α)}`, the primal
/// utility whose conjugate is `β y^(-α)`.
pub fn power_utility(alpha: f64, beta: f64, x: f64) -> f64 {
    log_power_utility(alpha, beta.ln(), x.ln()).exp()
}

/// `ln U_{α,β}(x)` from `ln β` and `ln x`.
pub fn log_power_utility(alpha: f64, log_beta: f64, log_x: f64) -> f64 {
    let r = 1.0 / (1.0 + alpha);
    (1.0 + alpha).ln() - alpha * r * alpha.ln() + r * log_beta + alpha * r * log_x
}

/// Tail estimate of the asymptotic elasticity `limsup x U'(x) / U(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticityEstimate {
    /// Supremum of `x U'(x) / U(x)` over the top decade of the grid.
    pub running_sup: f64,
    /// `(x, x U'(x) / U(x))` over that decade, in grid order.
    pub tail_values: Vec<(f64, f64)>,
}

/// Estimates `AE(U)` from the top decade of `x_grid`. This is an estimate of
/// a limsup from finitely many points, nothing more. `U` must be positive on
/// the grid; shift it first if it is not.
pub fn asymptotic_elasticity(u: &UtilitySpec, x_grid: &[f64]) -> Result<ElasticityEstimate> {
    let x_max = x_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x_grid.is_empty() || !(x_max > 0.0) {
        return Err(invalid("elasticity grid must contain positive points".into()));
    }
    let mut tail = Vec::new();
    for &x in x_grid {
        let ux = u.u(x)?;
        if !(ux > 0.0) {
            return Err(Error::Normalization { x, value: ux });
        }
        if x >= x_max / 10.0 {
            tail.push((x, x * u.u_prime(x)? / ux));
        }
    }
    let running_sup = tail.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(ElasticityEstimate { running_sup, tail_values: tail })
}

/// A bound `V(y) <= L y^(-alpha)` on `[y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorantBound {
    pub l: f64,
    pub log_l: f64,
    pub alpha: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl MajorantBound {
    pub fn log_bound(&self, y: f64) -> f64 {
        self.log_l - self.alpha * y.ln()
    }
}

/// Least-squares fit of `ln V = ln L - alpha ln y` over `y_grid`, with `L`
/// then raised so the bound holds at every grid point.
pub fn fit_majorant(v_spec: &UtilitySpec, y_grid: &[f64]) -> Result<MajorantBound> {
    if y_grid.len() < 2 {
        return Err(invalid("majorant fit needs at least two grid points".into()));
    }
    let mut pts = Vec::with_capacity(y_grid.len());
    let closed = v_spec.power_terms().is_some();
    for &y in y_grid {
        let log_v = if closed {
            v_spec.log_v(y)?
        } else {
            let v = v_spec.v(y)?;
            if !(v > 0.0) {
                return Err(Error::NonPositiveDual { y, value: v });
            }
            v.ln()
        };
        pts.push((y.ln(), log_v));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    let alpha = -sxy / sxx;
    let log_l = pts.iter().map(|&(lx, lv)| lv + alpha * lx).fold(f64::NEG_INFINITY, f64::max);
    let y_lo = y_grid.iter().copied().fold(f64::INFINITY, f64::min);
    let y_hi = y_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MajorantBound { l: log_l.exp(), log_l, alpha, y_lo, y_hi })
}

/// Monotone cubic Hermite interpolant (Fritsch–Carlson slopes) of `U`
/// against `s = ln x`.
#[derive(Debug, Clone, PartialEq)]
struct MonotoneCubic {
    s: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    fn from_utility(x: &[f64], u: &[f64]) -> Result<Self> {
        if x.len() != u.len() || x.len() < 3 {
            return Err(invalid("tabulated utility needs matching x and u with at least 3 points".into()));
        }
        if x.iter().any(|v| !(*v > 0.0 && v.is_finite())) || u.iter().any(|v| !v.is_finite()) {
            return Err(invalid("tabulated utility needs positive finite x and finite u".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) || u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("tabulated utility must be strictly increasing in x and u".into()));
        }
        let slopes: Vec<f64> = (0..x.len() - 1).map(|i| (u[i + 1] - u[i]) / (x[i + 1] - x[i])).collect();
        if slopes.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("tabulated utility must be strictly concave".into()));
        }
        let s: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let n = s.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (u[i + 1] - u[i]) / (s[i + 1] - s[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            // Weighted harmonic mean keeps the interpolant monotone.
            let (h0, h1) = (s[i] - s[i - 1], s[i + 1] - s[i]);
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
        Ok(Self { s, u: u.to_vec(), d })
    }

    fn locate(&self, x: f64) -> Result<(usize, f64, f64)> {
        let t = x.ln();
        let n = self.s.len();
        if !(t >= self.s[0] && t <= self.s[n - 1]) {
            return Err(invalid(format!(
                "x = {x} lies outside the tabulated range [{}, {}]",
                self.s[0].exp(),
                self.s[n - 1].exp()
            )));
        }
        let i = match self.s.partition_point(|&v| v <= t) {
            0 => 0,
            k => (k - 1).min(n - 2),
        };
        let h = self.s[i + 1] - self.s[i];
        Ok((i, (t - self.s[i]) / h, h))
    }

    fn value(&self, x: f64) -> Result<f64> {
        let (i, r, h) = self.locate(x)?;
        let (r2, r3) = (r * r, r * r * r);
        Ok((2.0 * r3 - 3.0 * r2 + 1.0) * self.u[i]
            + (r3 - 2.0 * r2 + r) * h * self.d[i]
            + (-2.0 * r3 + 3.0 * r2) * self.u[i + 1]
            + (r3 - r2) * h * self.d[i + 1])
    }

    /// `dU/dx = (dU/ds) / x`.
    fn derivative(&self, x: f64) -> Result<f64> {
        let (i, r, h) = self.locate(x)?;
        let r2 = r * r;
        let du_ds = (6.0 * r2 - 6.0 * r) / h * self.u[i]
            + (3.0 * r2 - 4.0 * r + 1.0) * self.d[i]
            + (-6.0 * r2 + 6.0 * r) / h * self.u[i + 1]
            + (3.0 * r2 - 2.0 * r) * self.d[i + 1];
        Ok(du_ds / x)
    }

    /// `x` with `U'(x) = y` inside the table.
    fn inverse_marginal(&self, y: f64) -> Result<f64> {
        let n = self.s.len();
        let (lo, hi) = (self.s[0], self.s[n - 1]);
        let g = |t: f64| self.derivative(t.exp()).map(|d| d - y).unwrap_or(f64::NAN);
        bisect(g, lo, hi, 1e-14)
            .map(f64::exp)
            .map_err(|_| invalid(format!("marginal utility {y} is outside the range covered by the table")))
    }
}
