//! A conjugate `V = Σ β_k y^{-α_k}` whose continuous-time dual value is
//! finite while the discrete optima blow up along a subsequence `n_k`.
//!
//! Everything runs in log space: `α_k` grows like `√n_k`, and `φ(α_k)`
//! reaches thousands of nats.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::bsm::log_v_bsm_power;
use crate::conjugate::{log_power_utility, SeriesTerm, UtilitySpec};
use crate::error::{Error, Result};
use crate::esscher::solve_esscher;
use crate::lattice::{gaussian_log_laplace, FiniteRV};
use crate::numeric::logsumexp;

/// Margin `ln L_ζ(λ) - λ²/2` a grid point needs to be accepted.
pub const MIN_MARGIN: f64 = 1e-6;
/// Default cap on `n` in the `n_k` search, `2^24`.
pub const DEFAULT_N_CAP: u64 = 1 << 24;

/// `ln L_ζ(λ) - ln L_Y(λ)`.
pub fn laplace_margin(rv: &FiniteRV, lambda: f64) -> f64 {
    rv.log_laplace(lambda) - gaussian_log_laplace(lambda)
}

/// Smallest `λ` on the grid with a margin above [`MIN_MARGIN`].
///
/// Innovations with `E[ζ³] <= 0` are rejected outright: their Laplace
/// transform never clears the normal one near zero.
pub fn find_lambda0(rv: &FiniteRV, lambda_grid: &[f64]) -> Result<f64> {
    let third = rv.third_moment();
    let best = lambda_grid.iter().map(|&l| laplace_margin(rv, l)).fold(f64::NEG_INFINITY, f64::max);
    if third <= 0.0 {
        return Err(Error::NoMargin { third_moment: third, best_margin: best });
    }
    lambda_grid
        .iter()
        .copied()
        .filter(|&l| l > 0.0 && laplace_margin(rv, l) > MIN_MARGIN)
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.min(l))))
        .ok_or(Error::NoMargin { third_moment: third, best_margin: best })
}

/// `log₂ M(k, n, 2 λ₀ √n)` from the closed form
/// `√n [-4 λ₀ ln k + 2 λ₀ (b_n - 1/8)] + n [ln L_ζ(2 a_n λ₀) - λ₀²/2]`.
pub fn log2_m(rv: &FiniteRV, k: u32, n: u64, lambda0: f64) -> Result<f64> {
    let p = solve_esscher(rv, n as usize)?;
    let (nf, s) = (n as f64, (n as f64).sqrt());
    let first = s * (-4.0 * lambda0 * (k as f64).ln() + 2.0 * lambda0 * (p.b - 0.125));
    let second = nf * (rv.log_laplace(2.0 * p.a * lambda0) - gaussian_log_laplace(lambda0));
    Ok((first + second) / LN_2)
}

/// One `k` of the construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub k: u32,
    pub n_k: u64,
    pub alpha_k: f64,
    pub log_beta_k: f64,
    pub log2_m: f64,
    pub log_x_k: f64,
    pub y_k: f64,
    /// The first `n` meeting the `M` target gave `x_k <= x_{k-1}`, so the
    /// search went on doubling.
    #[serde(default)]
    pub x_growth_binding: bool,
}

/// `λ₀` and the per-`k` records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleCertificate {
    pub rv: FiniteRV,
    pub lambda0: f64,
    pub records: Vec<CertificateRecord>,
    /// Whether `n_k / k` turned out strictly increasing; only
    /// nondecreasing is enforced.
    pub n_over_k_strict: bool,
}

/// `ln v^n(y)` for `V = β y^{-α}` under the Esscher kernel, with
/// `α = 2 λ₀ √n`: `ln β - α ln y + α b_n + n ln L_ζ(2 a_n λ₀)`.
pub fn log_v_n_power(rv: &FiniteRV, n: u64, lambda0: f64, log_beta: f64, y: f64) -> Result<f64> {
    let p = solve_esscher(rv, n as usize)?;
    let alpha = 2.0 * lambda0 * (n as f64).sqrt();
    Ok(log_beta - alpha * y.ln() + alpha * p.b + n as f64 * rv.log_laplace(2.0 * p.a * lambda0))
}

/// For each `k <= k_max`, the smallest `n` in the doubling schedule
/// `n_lo, 2 n_lo, 4 n_lo, ...` with `log₂ M >= 2k`, where
/// `n_lo = max(k, ceil(n_{k-1} k / (k - 1)))` keeps `n_k >= k` and `n_k / k`
/// nondecreasing. A candidate is also rejected while its `x_k` fails to
/// exceed `x_{k-1}`.
fn make_record(rv: &FiniteRV, lambda0: f64, k: u32, n_k: u64, log2_m: f64) -> Result<CertificateRecord> {
    let alpha_k = 2.0 * lambda0 * (n_k as f64).sqrt();
    // β_k v_{α_k,1}(1/k) = 2^{-k}.
    let log_beta_k = -(k as f64) * LN_2 - log_v_bsm_power(alpha_k, 0.0, 1.0 / k as f64);
    let y_k = (k as f64).sqrt();
    let log_x_k = (alpha_k / y_k).ln() + log_v_n_power(rv, n_k, lambda0, log_beta_k, y_k)?;
    Ok(CertificateRecord { k, n_k, alpha_k, log_beta_k, log2_m, log_x_k, y_k, x_growth_binding: false })
}

pub fn find_nk(rv: &FiniteRV, lambda0: f64, k_max: u32, n_cap: u64) -> Result<CounterexampleCertificate> {
    if !(lambda0 > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda0 = {lambda0} must be positive")));
    }
    let mut records: Vec<CertificateRecord> = Vec::new();
    for k in 1..=k_max {
        let mut n = match records.last() {
            Some(prev) => (k as u64).max((prev.n_k * k as u64).div_ceil(k as u64 - 1)),
            None => k as u64,
        };
        let target = 2.0 * k as f64;
        let prev_x = records.last().map(|r| r.log_x_k);
        let mut best = f64::NEG_INFINITY;
        let mut first_hit = None;
        let found = loop {
            if n > n_cap {
                break None;
            }
            let m = log2_m(rv, k, n, lambda0)?;
            best = best.max(m);
            if m >= target {
                first_hit.get_or_insert(n);
                let rec = make_record(rv, lambda0, k, n, m)?;
                // x_k must also grow; taking n larger only strengthens the
                // bound on M, so this is a legitimate extra requirement.
                if prev_x.is_none_or(|p| rec.log_x_k > p) {
                    break Some(rec);
                }
            }
            n *= 2;
        };
        let mut rec = found.ok_or(Error::SearchExhausted { k, n_max: n_cap, best_log2_m: best, target })?;
        rec.x_growth_binding = first_hit != Some(rec.n_k);
        records.push(rec);
    }
    let n_over_k_strict =
        records.windows(2).all(|w| (w[1].n_k as f64 / w[1].k as f64) > (w[0].n_k as f64 / w[0].k as f64));
    Ok(CounterexampleCertificate { rv: rv.clone(), lambda0, records, n_over_k_strict })
}

impl CounterexampleCertificate {
    /// The series conjugate `V = Σ β_k y^{-α_k}`.
    pub fn series_terms(&self) -> Vec<SeriesTerm> {
        self.records.iter().map(|r| SeriesTerm { alpha: r.alpha_k, log_beta: r.log_beta_k }).collect()
    }

    pub fn series_spec(&self) -> Result<UtilitySpec> {
        UtilitySpec::series(self.series_terms())
    }

    /// `ln v(y)` for the continuous-time dual value of the series,
    /// `Σ β_k φ(α_k) y^{-α_k}`.
    pub fn log_series_v(&self, y: f64) -> f64 {
        let xs: Vec<f64> = self.records.iter().map(|r| log_v_bsm_power(r.alpha_k, r.log_beta_k, y)).collect();
        logsumexp(&xs)
    }

    /// `Σ_k 2^{-k} k^{-α_k}`, the same value computed from the normalization
    /// directly.
    pub fn series_v1_from_normalization(&self) -> f64 {
        let xs: Vec<f64> = self.records.iter().map(|r| -(r.k as f64) * LN_2 - r.alpha_k * (r.k as f64).ln()).collect();
        logsumexp(&xs).exp()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&CertificateJson {
            lambda0: self.lambda0,
            records: &self.records,
            n_over_k_strict: self.n_over_k_strict,
        })
        .expect("certificate serializes")
    }
}

#[derive(Serialize)]
struct CertificateJson<'a> {
    lambda0: f64,
    records: &'a [CertificateRecord],
    n_over_k_strict: bool,
}

/// Per-`k` growth bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRecord {
    pub k: u32,
    pub log_x_k: f64,
    /// `u^{n_k}(x_k) / x_k = ((1 + α_k)/α_k) √k`.
    pub slope_lower_bound: f64,
    /// `√k x_probe`, a lower bound on `u^{n_k}(x_probe)` when
    /// `x_probe <= x_k`.
    pub probe_lower_bound: Option<f64>,
}

/// Concavity through the origin turns the ratio `u(x_k)/x_k` into the bound
/// `u^{n_k}(x) >= √k x` on `(0, x_k]`.
pub fn growth_certificate(cert: &CounterexampleCertificate, x_probe: f64) -> Vec<GrowthRecord> {
    cert.records
        .iter()
        .map(|r| {
            let sk = (r.k as f64).sqrt();
            let slope = (1.0 + r.alpha_k) / r.alpha_k * sk;
            let probe = (x_probe.ln() <= r.log_x_k).then_some(sk * x_probe);
            GrowthRecord { k: r.k, log_x_k: r.log_x_k, slope_lower_bound: slope, probe_lower_bound: probe }
        })
        .collect()
}

/// `ln(u(x_k) / x_k)` from the primal of `v^{n_k}(y) = H y^{-α}`, namely
/// `U_{α,H}`, evaluated at `x_k`. Equals `ln(((1 + α)/α) y_k)` exactly.
pub fn log_primal_ratio_at_x_k(cert: &CounterexampleCertificate, rec: &CertificateRecord) -> Result<f64> {
    let log_h = log_v_n_power(&cert.rv, rec.n_k, cert.lambda0, rec.log_beta_k, 1.0)?;
    Ok(log_power_utility(rec.alpha_k, log_h, rec.log_x_k) - rec.log_x_k)
}
