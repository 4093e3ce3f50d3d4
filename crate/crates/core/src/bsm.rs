//! The continuous-time economy: pricing kernel `Z = exp(-ω(1)/2 - 1/8)`, its
//! density, the dual value `v(y) = E[V(yZ)]` and the power-family closed
//! forms.

use crate::conjugate::{log_power_utility, UtilitySpec};
use crate::error::{Error, Result};
use crate::quadrature::GaussHermite;

/// Default Gauss–Hermite order for [`v_bsm`].
pub const DEFAULT_QUAD_ORDER: usize = 200;
/// Largest relative change between a rule and its doubled order that still
/// counts as converged.
pub const DIVERGENCE_RTOL: f64 = 1e-6;

/// `Z(w) = exp(-w/2 - 1/8)`.
pub fn z_of(w: f64) -> f64 {
    log_z_of(w).exp()
}

pub fn log_z_of(w: f64) -> f64 {
    -0.5 * w - 0.125
}

/// Density of `Z` under `P`: `sqrt(2/π) (1/y) exp(-2 (ln y + 1/8)^2)`.
pub fn z_density(y: f64) -> f64 {
    log_z_density(y).exp()
}

pub fn log_z_density(y: f64) -> f64 {
    let l = y.ln();
    0.5 * (2.0 / std::f64::consts::PI).ln() - l - 2.0 * (l + 0.125).powi(2)
}

/// `φ(α) = exp((α² + α) / 8)`.
pub fn phi(alpha: f64) -> f64 {
    log_phi(alpha).exp()
}

pub fn log_phi(alpha: f64) -> f64 {
    (alpha * alpha + alpha) / 8.0
}

/// `β φ(α) y^(-α)`, the dual value of `V(y) = β y^(-α)`. Overflows for large
/// `α`; prefer [`log_v_bsm_power`].
pub fn v_bsm_power(alpha: f64, beta: f64, y: f64) -> f64 {
    log_v_bsm_power(alpha, beta.ln(), y).exp()
}

pub fn log_v_bsm_power(alpha: f64, log_beta: f64, y: f64) -> f64 {
    log_beta + log_phi(alpha) - alpha * y.ln()
}

/// `u(x) = e^{α/8} U_{α,β}(x)`, the primal value for `V = β y^(-α)`.
pub fn u_bsm_power(alpha: f64, beta: f64, x: f64) -> f64 {
    log_u_bsm_power(alpha, beta.ln(), x).exp()
}

pub fn log_u_bsm_power(alpha: f64, log_beta: f64, x: f64) -> f64 {
    alpha / 8.0 + log_power_utility(alpha, log_beta, x.ln())
}

/// `v(y) = E[V(y Z)]` by Gauss–Hermite quadrature in the normal variable.
///
/// The rule is rerun at twice the order (half, past the largest supported
/// order) and a relative change above [`DIVERGENCE_RTOL`] is reported as
/// [`Error::Divergence`]: the integral is then most likely infinite.
pub fn v_bsm(v_spec: &UtilitySpec, y: f64, quad_order: usize) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::InvalidArgument(format!("y = {y} must be positive")));
    }
    let value = v_bsm_fixed(v_spec, y, quad_order)?;
    let check = if quad_order * 2 <= 640 { quad_order * 2 } else { quad_order / 2 };
    // Overflow at the check order while the base order stays finite is the
    // typical signature of a non-integrable tail.
    let other = match v_bsm_fixed(v_spec, y, check) {
        Err(Error::NonFinite { value: v, .. }) => v,
        r => r?,
    };
    if !other.is_finite() || (other - value).abs() > DIVERGENCE_RTOL * value.abs().max(1e-300) {
        return Err(Error::Divergence { order: quad_order, value, doubled: check, doubled_value: other });
    }
    Ok(value)
}

/// A single quadrature pass with no divergence check.
pub fn v_bsm_fixed(v_spec: &UtilitySpec, y: f64, quad_order: usize) -> Result<f64> {
    let gh = GaussHermite::cached(quad_order);
    let mut err = None;
    let value = gh.expect(|w| match v_spec.v(y * z_of(w)) {
        Ok(v) if v.is_finite() => v,
        Ok(v) => {
            err.get_or_insert(Error::NonFinite { w, value: v });
            0.0
        }
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None if value.is_finite() => Ok(value),
        None => Err(Error::NonFinite { w: f64::NAN, value }),
    }
}

/// `ln v(y)` evaluated entirely in log space, for conjugates whose values
/// overflow `f64`.
pub fn log_v_bsm(v_spec: &UtilitySpec, y: f64, quad_order: usize) -> Result<f64> {
    let gh = GaussHermite::cached(quad_order);
    let mut err = None;
    let value = gh.log_expect(|w| match v_spec.log_v(y * z_of(w)) {
        Ok(l) => l,
        Err(e) => {
            err.get_or_insert(e);
            f64::NEG_INFINITY
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Whether a sampled curve should be convex or concave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    Convex,
    Concave,
}

/// Samples of a value function such as `u`, `v`, `u_n` or `v_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueCurve {
    pub arg_name: String,
    pub samples: Vec<(f64, f64)>,
    pub curvature: Curvature,
    pub source: String,
}

impl ValueCurve {
    pub fn new(arg_name: &str, samples: Vec<(f64, f64)>, curvature: Curvature, source: &str) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument("curve arguments must be strictly increasing".into()));
        }
        Ok(Self { arg_name: arg_name.into(), samples, curvature, source: source.into() })
    }

    /// Samples `f` at `args`.
    pub fn sample<F: FnMut(f64) -> Result<f64>>(
        arg_name: &str,
        args: &[f64],
        mut f: F,
        curvature: Curvature,
        source: &str,
    ) -> Result<Self> {
        let samples = args.iter().map(|&a| f(a).map(|v| (a, v))).collect::<Result<Vec<_>>>()?;
        Self::new(arg_name, samples, curvature, source)
    }

    /// Checks the expected curvature on every interior triple, allowing
    /// `slack` (relative to the values involved) on the divided differences.
    pub fn curvature_holds(&self, slack: f64) -> bool {
        self.samples.windows(3).all(|t| {
            let s1 = (t[1].1 - t[0].1) / (t[1].0 - t[0].0);
            let s2 = (t[2].1 - t[1].1) / (t[2].0 - t[1].0);
            let tol = slack * (s1.abs() + s2.abs()).max(f64::MIN_POSITIVE);
            match self.curvature {
                Curvature::Convex => s2 >= s1 - tol,
                Curvature::Concave => s2 <= s1 + tol,
            }
        })
    }

    /// CSV with columns `arg,value,log_value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("arg,value,log_value\n");
        for &(a, v) in &self.samples {
            out.push_str(&format!("{a},{v},{}\n", v.ln()));
        }
        out
    }
}
