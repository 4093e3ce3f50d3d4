//! Dual and primal value functions of the `n`-step economy, priced either by
//! the continuous-time kernel `Z` or by the Esscher kernel `Z_n`.

use serde::{Deserialize, Serialize};

use crate::bsm::log_z_of;
use crate::conjugate::{conjugate_u_with, SeriesTerm, UtilitySpec};
use crate::error::{Error, Result};
use crate::esscher::{solve_esscher, EsscherParams};
use crate::lattice::{gaussian_log_laplace, terminal_distribution, FiniteRV, LatticeDistribution};
use crate::numeric::{logsumexp, neumaier_sum};

/// Which pricing kernel to evaluate the dual value under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    /// `Z(w) = exp(-w/2 - 1/8)`.
    Z,
    /// `Z_n(w) = exp(-a_n w - b_n)`.
    Zn,
}

/// An innovation, a step count, the exact law of `ω(1)` and the Esscher
/// parameters: everything the discrete dual values need.
#[derive(Debug, Clone)]
pub struct DiscreteEconomy {
    pub rv: FiniteRV,
    pub n: usize,
    pub lattice: LatticeDistribution,
    pub esscher: EsscherParams,
}

impl DiscreteEconomy {
    pub fn new(rv: &FiniteRV, n: usize, merge_tol: f64) -> Result<Self> {
        Ok(Self {
            rv: rv.clone(),
            n,
            lattice: terminal_distribution(rv, n, merge_tol)?,
            esscher: solve_esscher(rv, n)?,
        })
    }

    fn log_kernel(&self, kernel: Kernel, w: f64) -> f64 {
        match kernel {
            Kernel::Z => log_z_of(w),
            Kernel::Zn => self.esscher.log_z_n(w),
        }
    }

    /// `E_{P_n}[V(y K)]` for kernel `K`. Power-type conjugates go through
    /// log space term by term.
    pub fn dual_value(&self, kernel: Kernel, v_spec: &UtilitySpec, y: f64) -> Result<f64> {
        if let Some(terms) = v_spec.power_terms() {
            return Ok(self.log_dual_power(kernel, &terms, y)?.exp());
        }
        let mut err = None;
        let value = self.lattice.expect(|w| {
            let arg = y * self.log_kernel(kernel, w).exp();
            v_spec.v(arg).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    /// `ln E_{P_n}[V(y K)]`, for conjugates with positive values.
    pub fn log_dual_value(&self, kernel: Kernel, v_spec: &UtilitySpec, y: f64) -> Result<f64> {
        if let Some(terms) = v_spec.power_terms() {
            return self.log_dual_power(kernel, &terms, y);
        }
        let mut err = None;
        let value = self.lattice.log_expect(|w| {
            v_spec.log_v(y * self.log_kernel(kernel, w).exp()).unwrap_or_else(|e| {
                err.get_or_insert(e);
                f64::NEG_INFINITY
            })
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    /// `ln Σ_k β_k y^{-α_k} E[K^{-α_k}]`, each expectation in log space.
    fn log_dual_power(&self, kernel: Kernel, terms: &[SeriesTerm], y: f64) -> Result<f64> {
        let ly = y.ln();
        let mut parts = Vec::with_capacity(terms.len());
        for t in terms {
            let m = self.lattice.log_expect(|w| -t.alpha * self.log_kernel(kernel, w))?;
            parts.push(t.log_beta - t.alpha * ly + m);
        }
        Ok(logsumexp(&parts))
    }

    /// `v_n^Z(y) = E_{P_n}[V(y Z)]`.
    pub fn v_n_z(&self, v_spec: &UtilitySpec, y: f64) -> Result<f64> {
        self.dual_value(Kernel::Z, v_spec, y)
    }

    /// `v_n^{Z_n}(y) = E_{P_n}[V(y Z_n)]`.
    pub fn v_n_zn(&self, v_spec: &UtilitySpec, y: f64) -> Result<f64> {
        self.dual_value(Kernel::Zn, v_spec, y)
    }

    /// The relaxed optimum `inf_y [v_n^{Z_n}(y) + x y]` and its minimizer.
    pub fn u_n_relaxed(&self, u_spec: &UtilitySpec, x: f64) -> Result<(f64, f64)> {
        self.u_n_relaxed_from(u_spec, x, 0.0)
    }

    /// As [`DiscreteEconomy::u_n_relaxed`], starting the search at
    /// `ln y = log_y_start` (for warm starts across `n`).
    pub fn u_n_relaxed_from(&self, u_spec: &UtilitySpec, x: f64, log_y_start: f64) -> Result<(f64, f64)> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidArgument(format!("x = {x} must be positive")));
        }
        let p = conjugate_u_with(|y| self.v_n_zn(u_spec, y).unwrap_or(f64::NAN), x, log_y_start)?;
        Ok((p.value, p.y_star))
    }

    /// Tails of `V(y K)` beyond `±m` for both kernels.
    pub fn tail_report(&self, v_spec: &UtilitySpec, y: f64, m: f64) -> Result<DualEvalReport> {
        if !(m > 0.0) {
            return Err(Error::InvalidArgument(format!("cutoff M = {m} must be positive")));
        }
        let z = self.tails(Kernel::Z, v_spec, y, m)?;
        let zn = self.tails(Kernel::Zn, v_spec, y, m)?;
        Ok(DualEvalReport {
            n: self.n,
            y,
            m,
            value_v_z: z.trunc + z.pos - z.neg,
            value_v_zn: zn.trunc + zn.pos - zn.neg,
            tail_neg_z: z.neg,
            tail_pos_z: z.pos,
            tail_neg_zn: zn.neg,
            tail_pos_zn: zn.pos,
            trunc_z: z.trunc,
            trunc_zn: zn.trunc,
        })
    }

    fn tails(&self, kernel: Kernel, v_spec: &UtilitySpec, y: f64, m: f64) -> Result<Tails> {
        let (mut neg, mut pos, mut trunc) = (Vec::new(), Vec::new(), Vec::new());
        for pt in &self.lattice.points {
            let v = v_spec.v(y * self.log_kernel(kernel, pt.w).exp())?;
            if !v.is_finite() {
                return Err(Error::NonFinite { w: pt.w, value: v });
            }
            if v < -m {
                neg.push(pt.prob * v.abs());
            } else if v > m {
                pos.push(pt.prob * v);
            } else {
                trunc.push(pt.prob * v);
            }
        }
        Ok(Tails { neg: neumaier_sum(neg), pos: neumaier_sum(pos), trunc: neumaier_sum(trunc) })
    }
}

struct Tails {
    neg: f64,
    pos: f64,
    trunc: f64,
}

/// Dual values and their tails at a cutoff `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualEvalReport {
    pub n: usize,
    pub y: f64,
    pub m: f64,
    pub value_v_z: f64,
    pub value_v_zn: f64,
    /// `E[|V(yZ)|; V < -M]`.
    pub tail_neg_z: f64,
    /// `E[V(yZ); V > M]`.
    pub tail_pos_z: f64,
    pub tail_neg_zn: f64,
    pub tail_pos_zn: f64,
    /// `E[V(yZ); |V| <= M]`.
    pub trunc_z: f64,
    pub trunc_zn: f64,
}

impl DualEvalReport {
    pub const CSV_HEADER: &'static str = "n,y,M,tail_neg_Z,tail_pos_Z,tail_neg_Zn,tail_pos_Zn\n";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}\n",
            self.n, self.y, self.m, self.tail_neg_z, self.tail_pos_z, self.tail_neg_zn, self.tail_pos_zn
        )
    }
}

/// `E_{P_n}[exp(γ ω(1))] = L(γ/√n)^n` next to its Gaussian limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfPair {
    pub log_discrete: f64,
    pub log_limit: f64,
}

impl MgfPair {
    pub fn discrete(&self) -> f64 {
        self.log_discrete.exp()
    }

    pub fn limit(&self) -> f64 {
        self.log_limit.exp()
    }

    /// `discrete / limit - 1`.
    pub fn relative_gap(&self) -> f64 {
        (self.log_discrete - self.log_limit).exp_m1()
    }
}

pub fn mgf_convergence(rv: &FiniteRV, gamma: f64, n: usize) -> MgfPair {
    let nf = n as f64;
    MgfPair { log_discrete: nf * rv.log_laplace(gamma / nf.sqrt()), log_limit: gaussian_log_laplace(gamma) }
}

/// One row of the dual-curve table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualCurveRow {
    pub n: usize,
    pub y: f64,
    pub v_n_z: f64,
    pub v_n_zn: f64,
    pub v_bsm: f64,
}

impl DualCurveRow {
    pub const CSV_HEADER: &'static str = "n,y,v_n_Z,v_n_Zn,v_bsm,gap_Z,gap_Zn\n";

    /// `gap_Z = v_n_Z - v_bsm`, `gap_Zn = v_n_Zn - v_n_Z`.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}\n",
            self.n,
            self.y,
            self.v_n_z,
            self.v_n_zn,
            self.v_bsm,
            self.v_n_z - self.v_bsm,
            self.v_n_zn - self.v_n_z
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bsm::{u_bsm_power, v_bsm};
    use crate::conjugate::Family;

    fn inv() -> UtilitySpec {
        UtilitySpec::power_conjugate(1.0, 1.0).unwrap()
    }

    #[test]
    fn one_step_spot_values() {
        let e = DiscreteEconomy::new(&FiniteRV::symmetric_binomial(), 1, 0.0).unwrap();
        let c = 0.5f64.cosh();
        assert!((e.v_n_z(&inv(), 1.0).unwrap() - 0.125f64.exp() * c).abs() < 1e-14);
        let v = e.v_n_z(&inv(), 1.0).unwrap();
        assert!((v - 0.125f64.exp() * 0.5f64.cosh()).abs() < 1e-12);
        assert!((v - 1.277_767_6).abs() < 1e-6);
        assert!((e.v_n_zn(&inv(), 1.0).unwrap() - c * c).abs() < 1e-14);
        let (u, _) = e.u_n_relaxed(&inv(), 1.0).unwrap();
        assert!((u - 2.0 * c).abs() < 1e-10);
        assert!((u - 2.255_252).abs() < 1e-6);
    }

    #[test]
    fn constant_conjugate_is_preserved() {
        // A power term with a vanishing exponent is constant to f64 precision.
        let e = DiscreteEconomy::new(&FiniteRV::trinomial(), 5, 1e-9).unwrap();
        let near_const = UtilitySpec::power_conjugate(1e-300, 2.5).unwrap();
        assert!((e.v_n_z(&near_const, 0.7).unwrap() - 2.5).abs() < 1e-14);
        assert!((e.v_n_zn(&near_const, 0.7).unwrap() - 2.5).abs() < 1e-14);
    }

    #[test]
    fn lattice_path_matches_closed_form_power() {
        let rv = FiniteRV::asymmetric_binomial();
        let e = DiscreteEconomy::new(&rv, 16, 1e-9).unwrap();
        let lambda0: f64 = 0.5;
        let alpha = 2.0 * lambda0 * 4.0;
        let spec = UtilitySpec::power_conjugate(alpha, 1.0).unwrap();
        let p = e.esscher;
        for y in [0.5, 2.0] {
            let closed = -alpha * f64::ln(y) + alpha * p.b + 16.0 * rv.log_laplace(2.0 * p.a * lambda0);
            assert!((e.log_dual_value(Kernel::Zn, &spec, y).unwrap() - closed).abs() < 1e-10);
        }
        // The generic path agrees with the log-space path.
        let shifted = spec.clone().with_shift(1e-30).unwrap();
        let generic = e.v_n_zn(&shifted, 2.0).unwrap() + 1e-30;
        assert!((generic / e.v_n_zn(&spec, 2.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relaxed_value_approaches_bsm() {
        let rv = FiniteRV::symmetric_binomial();
        let target = u_bsm_power(1.0, 1.0, 1.0);
        let gaps: Vec<f64> = [4, 16, 64]
            .iter()
            .map(|&n| {
                let e = DiscreteEconomy::new(&rv, n, 0.0).unwrap();
                (e.u_n_relaxed(&inv(), 1.0).unwrap().0 - target).abs()
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn relaxed_value_is_homogeneous_for_crra() {
        let e = DiscreteEconomy::new(&FiniteRV::trinomial(), 6, 1e-9).unwrap();
        let u = UtilitySpec::crra(1.0 / 3.0).unwrap();
        let (a, _) = e.u_n_relaxed(&u, 1.0).unwrap();
        let (b, _) = e.u_n_relaxed(&u, 5.0).unwrap();
        assert!((b / a - 5f64.powf(1.0 / 3.0)).abs() < 1e-10);
    }

    #[test]
    fn v_n_z_converges_to_continuous_value() {
        let e = DiscreteEconomy::new(&FiniteRV::symmetric_binomial(), 64, 0.0).unwrap();
        let v = v_bsm(&inv(), 1.0, 200).unwrap();
        assert!((e.v_n_z(&inv(), 1.0).unwrap() - v).abs() < 1e-3);
    }

    #[test]
    fn mgf_pairs() {
        let p = mgf_convergence(&FiniteRV::symmetric_binomial(), 1.0, 100);
        assert!((p.discrete() - 0.1f64.cosh().powi(100)).abs() < 1e-12);
        assert!((p.limit() - 1.648_721).abs() < 1e-6);
        let z = mgf_convergence(&FiniteRV::asymmetric_binomial(), 0.0, 50);
        assert_eq!((z.discrete(), z.limit()), (1.0, 1.0));
        let a = mgf_convergence(&FiniteRV::asymmetric_binomial(), 1.0, 10_000);
        assert!(a.relative_gap().abs() < 1e-2);
    }

    #[test]
    fn tails_decompose_the_value() {
        let rv = FiniteRV::asymmetric_binomial();
        let sq = UtilitySpec::power_conjugate(2.0, 1.0).unwrap();
        let shifted = UtilitySpec::crra(0.5).unwrap().with_shift(1.0).unwrap();
        for n in [4, 16, 64] {
            let e = DiscreteEconomy::new(&rv, n, 1e-9).unwrap();
            let mut prev = f64::INFINITY;
            for m in [0.5, 2.0, 8.0, 32.0] {
                let r = e.tail_report(&sq, 1.0, m).unwrap();
                assert_eq!(r.tail_neg_z, 0.0);
                assert!(r.tail_pos_z <= prev);
                prev = r.tail_pos_z;
                let v = e.v_n_z(&sq, 1.0).unwrap();
                assert!((r.trunc_z + r.tail_pos_z - r.tail_neg_z - v).abs() < 1e-12 * v.max(1.0));
                let s = e.tail_report(&shifted, 1.0, m).unwrap();
                let vs = e.v_n_zn(&shifted, 1.0).unwrap();
                assert!((s.trunc_zn + s.tail_pos_zn - s.tail_neg_zn - vs).abs() < 1e-12);
            }
            let huge = e.tail_report(&sq, 1.0, 1e300).unwrap();
            assert_eq!((huge.tail_neg_z, huge.tail_pos_z, huge.tail_neg_zn, huge.tail_pos_zn), (0.0, 0.0, 0.0, 0.0));
        }
        assert!(matches!(shifted.family, Family::Crra { .. }));
    }
}
