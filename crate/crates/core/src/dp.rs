//! The true `n`-step optimum `u_n(x)` by dynamic programming.
//!
//! Returns are i.i.d. and only terminal wealth enters the objective, so the
//! state is `(step, wealth)`: the price level never matters. Each step picks
//! the fraction `θ` of wealth held in the stock, which turns wealth `x` into
//! `x (1 + θ (e^{ζ/√n} - 1))`.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conjugate::{Family, UtilitySpec};
use crate::duals::DiscreteEconomy;
use crate::error::{Error, Result};
use crate::esscher::solve_esscher;
use crate::lattice::FiniteRV;
use crate::numeric::{golden_max, logsumexp, minimize_unbounded, neumaier_sum};

/// Tolerance on `θ` for the per-step maximization.
pub const THETA_TOL: f64 = 1e-12;
/// Relative margin kept from the no-bankruptcy bounds on `θ`.
pub const THETA_MARGIN: f64 = 1e-9;
/// Grid-exit mass above which [`GridDp::value_at`] fails.
pub const GRID_EXIT_LIMIT: f64 = 1e-3;

/// Gross one-step stock returns `e^{v/√n}` with their probabilities.
fn step_returns(rv: &FiniteRV, n: usize) -> Vec<(f64, f64)> {
    let s = (n as f64).sqrt();
    rv.atoms().iter().map(|a| ((a.value / s).exp(), a.prob)).collect()
}

/// Open interval of `θ` keeping `1 + θ (r - 1) > 0` for every return,
/// shrunk by [`THETA_MARGIN`].
pub fn theta_bounds(rv: &FiniteRV, n: usize) -> (f64, f64) {
    let r = step_returns(rv, n);
    let r_min = r.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let r_max = r.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let hi = 1.0 / (1.0 - r_min);
    let lo = -1.0 / (r_max - 1.0);
    (lo * (1.0 - THETA_MARGIN), hi * (1.0 - THETA_MARGIN))
}

/// CRRA solution: `u_n(x) = (x^γ / γ) m*^n` with
/// `m* = max_θ E[(1 + θ (e^{ζ/√n} - 1))^γ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrraDp {
    pub n: usize,
    pub gamma: f64,
    pub m_star: f64,
    /// The optimal fraction, the same at every step and wealth level.
    pub theta: f64,
}

impl CrraDp {
    pub fn value_at(&self, x: f64) -> f64 {
        self.log_value_at(x).exp()
    }

    pub fn log_value_at(&self, x: f64) -> f64 {
        self.gamma * x.ln() - self.gamma.ln() + self.n as f64 * self.m_star.ln()
    }
}

/// One-step CRRA objective `E[(1 + θ (R - 1))^γ]`.
pub fn crra_step_objective(rv: &FiniteRV, n: usize, gamma: f64, theta: f64) -> f64 {
    neumaier_sum(step_returns(rv, n).iter().map(|&(r, p)| p * (1.0 + theta * (r - 1.0)).powf(gamma)))
}

pub fn crra_dp(rv: &FiniteRV, n: usize, gamma: f64) -> Result<CrraDp> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must lie in (0, 1)")));
    }
    let (lo, hi) = theta_bounds(rv, n);
    let (theta, m_star) = golden_max(|t| crra_step_objective(rv, n, gamma, t), lo, hi, THETA_TOL);
    Ok(CrraDp { n, gamma, m_star, theta })
}

/// Log-spaced wealth grid for [`general_dp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WealthGrid {
    pub points: usize,
    pub low: f64,
    pub high: f64,
}

impl WealthGrid {
    /// 2048 points on `[x 1e-4, x 1e4]`.
    pub fn around(x: f64) -> Self {
        Self { points: 2048, low: x * 1e-4, high: x * 1e4 }
    }

    /// Shrinks the grid to the tabulated range of a numeric utility, where
    /// `U` is defined. Mass leaving the smaller grid is reported as usual.
    pub fn fit_to(self, u_spec: &UtilitySpec) -> Self {
        match &u_spec.family {
            Family::NumericU { x, .. } => {
                let (lo, hi) = (x[0] * (1.0 + 1e-12), x[x.len() - 1] * (1.0 - 1e-12));
                Self { points: self.points, low: self.low.max(lo), high: self.high.min(hi) }
            }
            _ => self,
        }
    }
}

/// How values are stored on the grid before linear interpolation in
/// `ln x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transform {
    /// `ln v`, for utilities positive on the grid.
    Log,
    /// `sign(v) ln(1 + |v|)`.
    SignedLog,
}

impl Transform {
    fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::SignedLog => v.signum() * v.abs().ln_1p(),
        }
    }

    fn invert(self, t: f64) -> f64 {
        match self {
            Transform::Log => t.exp(),
            Transform::SignedLog => t.signum() * t.abs().exp_m1(),
        }
    }
}

/// Backward-induction solution on a wealth grid.
#[derive(Debug, Clone)]
pub struct GridDp {
    pub n: usize,
    pub family: &'static str,
    pub grid: WealthGrid,
    u_spec: UtilitySpec,
    returns: Vec<(f64, f64)>,
    bounds: (f64, f64),
    s0: f64,
    h: f64,
    transform: Transform,
    /// Transformed `U` on the grid, for wealth outside the domain of `U`.
    terminal: Vec<f64>,
    /// Transformed `V_1` on the grid (empty when `n == 1`).
    v1: Vec<f64>,
    /// `theta[k - 1][i]`: optimal fraction at step `k >= 1` and node `i`.
    theta: Vec<Vec<f64>>,
}

/// Value, first-step fraction and grid-exit mass at one wealth level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpPoint {
    pub x: f64,
    pub value: f64,
    pub theta: f64,
    pub exit_fraction: f64,
}

impl GridDp {
    fn interp(&self, table: &[f64], x: f64) -> f64 {
        let pos = (x.ln() - self.s0) / self.h;
        let last = table.len() - 1;
        let i = (pos.floor().max(0.0) as usize).min(last - 1);
        let r = pos - i as f64;
        self.transform.invert(table[i] + r * (table[i + 1] - table[i]))
    }

    fn step_value(&self, next: Option<&[f64]>, x: f64, theta: f64) -> f64 {
        neumaier_sum(self.returns.iter().map(|&(r, p)| {
            let w = x * (1.0 + theta * (r - 1.0));
            let v = match next {
                Some(t) => self.interp(t, w),
                // Off the domain of a tabulated U, extrapolate like the
                // interior steps do; the exit-mass check reports it.
                None => self.u_spec.u(w).unwrap_or_else(|_| self.interp(&self.terminal, w)),
            };
            p * v
        }))
    }

    fn optimize(&self, next: Option<&[f64]>, x: f64) -> (f64, f64) {
        let (lo, hi) = self.bounds;
        golden_max(|t| self.step_value(next, x, t), lo, hi, THETA_TOL)
    }

    fn node(&self, i: usize) -> f64 {
        (self.s0 + self.h * i as f64).exp()
    }

    /// `u_n(x)` with the first step optimized at the exact `x`, plus a
    /// forward pass of the optimal policy to measure mass leaving the grid.
    pub fn value_at(&self, x: f64) -> Result<DpPoint> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!("x = {x} must be positive")));
        }
        let next = if self.n == 1 { None } else { Some(self.v1.as_slice()) };
        let (theta, value) = self.optimize(next, x);
        if !value.is_finite() {
            return Err(Error::NonFinite { w: x, value });
        }
        let exit_fraction = self.exit_mass(x, theta);
        if exit_fraction > GRID_EXIT_LIMIT {
            return Err(Error::GridExit { fraction: exit_fraction });
        }
        if exit_fraction > 0.0 {
            warn!("{exit_fraction:.3e} of the probability mass left the wealth grid");
        }
        Ok(DpPoint { x, value, theta, exit_fraction })
    }

    /// Pushes mass forward under the stored policy, splitting each landing
    /// point between its two neighbouring nodes in `ln x`.
    fn exit_mass(&self, x: f64, theta0: f64) -> f64 {
        let m = self.grid.points;
        let mut mass = vec![0.0; m];
        let mut exited = 0.0;
        let mut deposit = |mass: &mut Vec<f64>, w: f64, p: f64| {
            let pos = (w.ln() - self.s0) / self.h;
            if !(pos >= 0.0 && pos <= (m - 1) as f64) {
                exited += p;
                return;
            }
            let i = (pos.floor() as usize).min(m - 2);
            let r = pos - i as f64;
            mass[i] += p * (1.0 - r);
            mass[i + 1] += p * r;
        };
        for &(r, p) in &self.returns {
            deposit(&mut mass, x * (1.0 + theta0 * (r - 1.0)), p);
        }
        for k in 1..self.n {
            let mut next = vec![0.0; m];
            for (i, &q) in mass.iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                let (xi, th) = (self.node(i), self.theta[k - 1][i]);
                for &(r, p) in &self.returns {
                    deposit(&mut next, xi * (1.0 + th * (r - 1.0)), q * p);
                }
            }
            mass = next;
        }
        exited
    }
}

/// Backward induction `V_k(x) = max_θ E[V_{k+1}(x (1 + θ (R - 1)))]`,
/// `V_n = U`, on a log wealth grid. The last step uses `U` itself; earlier
/// steps interpolate linearly in `ln x` on log values (or sign-preserving
/// log values when `U` is not positive on the grid).
pub fn general_dp(rv: &FiniteRV, n: usize, u_spec: &UtilitySpec, grid: WealthGrid) -> Result<GridDp> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if grid.points < 2 || !(grid.low > 0.0 && grid.high > grid.low) {
        return Err(Error::InvalidArgument("wealth grid needs >= 2 points on 0 < low < high".into()));
    }
    let s0 = grid.low.ln();
    let h = (grid.high.ln() - s0) / (grid.points - 1) as f64;
    let nodes: Vec<f64> = (0..grid.points).map(|i| (s0 + h * i as f64).exp()).collect();
    let mut positive = true;
    let mut terminal = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        let u = u_spec.u(x)?;
        if !u.is_finite() {
            return Err(Error::NonFinite { w: x, value: u });
        }
        positive &= u > 0.0;
        terminal.push(u);
    }
    let transform = if positive { Transform::Log } else { Transform::SignedLog };
    let terminal = terminal.into_iter().map(|u| transform.apply(u)).collect();
    let mut dp = GridDp {
        n,
        family: u_spec.family_id(),
        grid,
        u_spec: u_spec.clone(),
        returns: step_returns(rv, n),
        bounds: theta_bounds(rv, n),
        s0,
        h,
        transform,
        terminal,
        v1: Vec::new(),
        theta: vec![Vec::new(); n.saturating_sub(1)],
    };
    let mut next: Option<Vec<f64>> = None;
    for k in (1..n).rev() {
        let solved: Vec<(f64, f64)> = nodes.par_iter().map(|&x| dp.optimize(next.as_deref(), x)).collect();
        if let Some(bad) = solved.iter().position(|s| !s.1.is_finite()) {
            return Err(Error::NonFinite { w: nodes[bad], value: solved[bad].1 });
        }
        dp.theta[k - 1] = solved.iter().map(|s| s.0).collect();
        next = Some(solved.iter().map(|s| transform.apply(s.1)).collect());
    }
    dp.v1 = next.unwrap_or_default();
    Ok(dp)
}

/// The two-atom (complete) market solved by duality:
/// `inf_y [Σ_j C(n, j) p^j q^{n-j} V(y Z_n(w_j)) + x y]`, summing over the
/// explicit binomial law instead of the convolution lattice.
pub fn binomial_complete_u(rv: &FiniteRV, n: usize, u_spec: &UtilitySpec, x: f64) -> Result<(f64, f64)> {
    let atoms = rv.atoms();
    if atoms.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "complete-market duality needs a two-atom innovation, got {} atoms",
            atoms.len()
        )));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("x = {x} must be positive")));
    }
    let p = solve_esscher(rv, n)?;
    let (lo, hi) = (atoms[0], atoms[1]);
    let s = (n as f64).sqrt();
    let mut log_c = 0.0;
    let mut log_w = Vec::with_capacity(n + 1);
    let mut ws = Vec::with_capacity(n + 1);
    for j in 0..=n {
        if j > 0 {
            log_c += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        log_w.push(log_c + j as f64 * hi.prob.ln() + (n - j) as f64 * lo.prob.ln());
        ws.push((j as f64 * hi.value + (n - j) as f64 * lo.value) / s);
    }
    let v_n = |y: f64| -> f64 {
        if u_spec.power_terms().is_some() {
            let terms: Vec<f64> =
                log_w.iter().zip(&ws).map(|(lw, &w)| lw + u_spec.log_v(y * p.z_n(w)).unwrap_or(f64::NAN)).collect();
            logsumexp(&terms).exp()
        } else {
            neumaier_sum(log_w.iter().zip(&ws).map(|(lw, &w)| lw.exp() * u_spec.v(y * p.z_n(w)).unwrap_or(f64::NAN)))
        }
    };
    let (t, value) = minimize_unbounded(|t| v_n(t.exp()) + x * t.exp(), 0.0, 1e-10, 1000)?;
    Ok((value, t.exp()))
}

/// Both sides of `u_n(x) <= u_n^{Z_n}(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationCheck {
    pub n: usize,
    pub x: f64,
    pub u_dp: f64,
    pub u_relaxed: f64,
    pub theta_star: f64,
    /// `u_relaxed - u_dp`.
    pub gap: f64,
    pub ok: bool,
}

impl RelaxationCheck {
    pub const CSV_HEADER: &'static str = "n,x,u_dp,u_relaxed,theta_star,gap,ok\n";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{},{}\n", self.n, self.x, self.u_dp, self.u_relaxed, self.theta_star, self.gap, self.ok)
    }
}

/// The true optimum: factorized for plain CRRA, wealth grid otherwise.
pub fn dp_value(rv: &FiniteRV, n: usize, u_spec: &UtilitySpec, x: f64) -> Result<DpPoint> {
    match u_spec.crra_gamma() {
        Some(gamma) => {
            let c = crra_dp(rv, n, gamma)?;
            Ok(DpPoint { x, value: c.value_at(x), theta: c.theta, exit_fraction: 0.0 })
        }
        None => general_dp(rv, n, u_spec, WealthGrid::around(x).fit_to(u_spec))?.value_at(x),
    }
}

/// Checks `u_dp <= u_relaxed (1 + 1e-8) + 1e-12`.
pub fn verify_relaxation(
    rv: &FiniteRV,
    n: usize,
    u_spec: &UtilitySpec,
    x: f64,
    merge_tol: f64,
) -> Result<RelaxationCheck> {
    let dp = dp_value(rv, n, u_spec, x)?;
    let econ = DiscreteEconomy::new(rv, n, merge_tol)?;
    let (u_relaxed, _) = econ.u_n_relaxed(u_spec, x)?;
    Ok(RelaxationCheck {
        n,
        x,
        u_dp: dp.value,
        u_relaxed,
        theta_star: dp.theta,
        gap: u_relaxed - dp.value,
        ok: dp.value <= u_relaxed * (1.0 + 1e-8) + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsm::u_bsm_power;

    #[test]
    fn crra_beats_the_bond_floor() {
        let rv = FiniteRV::trinomial();
        for n in [1, 4, 32] {
            let c = crra_dp(&rv, n, 1.0 / 3.0).unwrap();
            assert!(c.value_at(2.0) >= 3.0 * 2f64.powf(1.0 / 3.0));
            let (lo, hi) = theta_bounds(&rv, n);
            assert!(c.theta > lo && c.theta < hi);
        }
    }

    #[test]
    fn crra_approaches_the_continuous_optimum() {
        let rv = FiniteRV::symmetric_binomial();
        let target = u_bsm_power(0.5, 2.0, 1.0);
        let c = crra_dp(&rv, 256, 1.0 / 3.0).unwrap();
        assert!((c.value_at(1.0) / target - 1.0).abs() <= 0.02);
        assert!((c.theta - 0.75).abs() < 0.05);
    }

    #[test]
    fn step_objective_is_concave_at_the_optimum() {
        let rv = FiniteRV::asymmetric_binomial();
        let c = crra_dp(&rv, 16, 0.25).unwrap();
        let f = |t| crra_step_objective(&rv, 16, 0.25, t);
        let h = 1e-3;
        assert!(f(c.theta + h) - 2.0 * f(c.theta) + f(c.theta - h) <= 1e-9);
    }

    #[test]
    fn grid_dp_reproduces_factorized_crra() {
        let rv = FiniteRV::symmetric_binomial();
        let u = UtilitySpec::crra(1.0 / 3.0).unwrap();
        let g = general_dp(&rv, 16, &u, WealthGrid::around(1.0)).unwrap();
        let p = g.value_at(1.0).unwrap();
        let c = crra_dp(&rv, 16, 1.0 / 3.0).unwrap();
        assert!((p.value / c.value_at(1.0) - 1.0).abs() < 5e-3);
        assert_eq!(p.exit_fraction, 0.0);
    }

    #[test]
    fn single_step_grid_dp_is_a_direct_maximization() {
        let rv = FiniteRV::trinomial();
        let u = UtilitySpec::power_conjugate(1.0, 1.0).unwrap();
        let g = general_dp(&rv, 1, &u, WealthGrid::around(1.5)).unwrap();
        let p = g.value_at(1.5).unwrap();
        let (lo, hi) = theta_bounds(&rv, 1);
        let direct = golden_max(
            |t| rv.atoms().iter().map(|a| a.prob * u.u(1.5 * (1.0 + t * (a.value.exp() - 1.0))).unwrap()).sum::<f64>(),
            lo,
            hi,
            1e-12,
        );
        assert!((p.value - direct.1).abs() < 1e-8);
    }

    #[test]
    fn grid_dp_handles_negative_utilities() {
        let rv = FiniteRV::symmetric_binomial();
        let u = UtilitySpec::crra(0.5).unwrap().with_shift(3.0).unwrap();
        let g = general_dp(&rv, 8, &u, WealthGrid::around(1.0)).unwrap();
        let plain = crra_dp(&rv, 8, 0.5).unwrap().value_at(1.0) - 3.0;
        assert!((g.value_at(1.0).unwrap().value - plain).abs() < 5e-3);
    }

    #[test]
    fn tabulated_utility_stays_on_its_table() {
        let rv = FiniteRV::trinomial();
        let x: Vec<f64> = (0..=160).map(|i| 10f64.powf(-3.0 + 0.05 * i as f64)).collect();
        let u: Vec<f64> = x.iter().map(|v| 3.0 * v.cbrt()).collect();
        let spec = UtilitySpec::numeric_u(x, u).unwrap();
        let exact = crra_dp(&rv, 4, 1.0 / 3.0).unwrap().value_at(1.0);
        let p = dp_value(&rv, 4, &spec, 1.0).unwrap();
        assert!((p.value / exact - 1.0).abs() < 5e-3, "{} vs {exact}", p.value);
    }

    #[test]
    fn complete_market_duality_equals_dp() {
        let rv = FiniteRV::symmetric_binomial();
        let u = UtilitySpec::crra(1.0 / 3.0).unwrap();
        let (v, _) = binomial_complete_u(&rv, 4, &u, 1.0).unwrap();
        let c = crra_dp(&rv, 4, 1.0 / 3.0).unwrap().value_at(1.0);
        assert!((v / c - 1.0).abs() < 1e-8);
        let sq = UtilitySpec::power_conjugate(1.0, 1.0).unwrap();
        let (a, _) = binomial_complete_u(&rv, 3, &sq, 1.0).unwrap();
        let (b, _) = binomial_complete_u(&rv, 3, &sq, 4.0).unwrap();
        assert!((b / a - 2.0).abs() < 1e-9);
        assert!(binomial_complete_u(&FiniteRV::trinomial(), 2, &u, 1.0).is_err());
    }

    #[test]
    fn relaxation_holds_and_is_tight_when_complete() {
        let u = UtilitySpec::crra(1.0 / 3.0).unwrap();
        let r = verify_relaxation(&FiniteRV::trinomial(), 4, &u, 1.0, 1e-9).unwrap();
        assert!(r.ok && r.u_relaxed >= 3.0);
        let b = verify_relaxation(&FiniteRV::asymmetric_binomial(), 4, &u, 1.0, 1e-9).unwrap();
        assert!((b.u_dp / b.u_relaxed - 1.0).abs() < 1e-8);
    }
}
