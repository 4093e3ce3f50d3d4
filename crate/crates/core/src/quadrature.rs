//! Gaussian quadrature rules computed by Newton iteration on the
//! three-term recurrences.
//!
//! Hermite weights are kept in log form. At order 400 the smallest weights
//! sit near `exp(-780)`, far below the `f64` range, while integrands such as
//! `exp(c w)` grow fast enough that those tail nodes still matter.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::numeric::{bisect, logsumexp, neumaier_sum};

/// Gauss–Hermite rule for expectations under the standard normal law.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    /// Nodes in the standard-normal variable, ascending.
    pub nodes: Vec<f64>,
    /// `ln` of the weights; the weights sum to one.
    pub log_weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the rule of the given order. Prefer [`GaussHermite::cached`].
    ///
    /// Orders above 640 are rejected: the starting value of the Hermite
    /// function recurrence underflows at the outermost nodes.
    pub fn new(order: usize) -> Self {
        assert!((1..=640).contains(&order), "Gauss-Hermite order must be in 1..=640");
        let n = order;
        let nf = n as f64;
        // Positive roots of psi_n, bracketed by sign changes on a grid finer
        // than the smallest root spacing (about pi / sqrt(2n)), then bisected.
        let step = std::f64::consts::PI / (2.0 * nf + 1.0).sqrt() / 8.0;
        let x_max = (2.0 * nf + 1.0).sqrt() + 1.0;
        let mut positive = Vec::with_capacity(n / 2);
        let mut a = if n % 2 == 1 { 0.5 * step } else { 0.0 };
        let mut fa = hermite_functions(n, a).0;
        while a < x_max && positive.len() < n / 2 {
            let b = a + step;
            let fb = hermite_functions(n, b).0;
            if fa.signum() != fb.signum() {
                let root = bisect(|t| hermite_functions(n, t).0, a, b, 0.0).expect("sign change brackets a root");
                positive.push(root);
            }
            a = b;
            fa = fb;
        }
        assert_eq!(positive.len(), n / 2, "Gauss-Hermite root scan missed roots");
        let log_weight = |z: f64| {
            let (_, psi_nm1) = hermite_functions(n, z);
            // w = exp(-x^2) / (n psi_{n-1}(x)^2); divide by sqrt(pi) to normalize.
            -z * z - nf.ln() - 2.0 * psi_nm1.abs().ln() - 0.5 * PI.ln()
        };
        let mut x: Vec<f64> = positive.iter().rev().map(|r| -r).collect();
        if n % 2 == 1 {
            x.push(0.0);
        }
        x.extend(positive.iter().copied());
        let logw: Vec<f64> = x.iter().map(|&z| log_weight(z)).collect();
        let sqrt2 = 2f64.sqrt();
        let nodes: Vec<f64> = x.iter().map(|v| v * sqrt2).collect();
        Self { nodes, log_weights: logw }
    }

    /// Shared read-only rule for `order`, built on first use.
    pub fn cached(order: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard.entry(order).or_insert_with(|| Arc::new(GaussHermite::new(order))).clone()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E[g(W)]` for `W ~ N(0, 1)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        neumaier_sum(self.nodes.iter().zip(&self.log_weights).map(|(&w, &lw)| {
            let v = g(w);
            if v == 0.0 {
                0.0
            } else {
                lw.exp() * v
            }
        }))
    }

    /// `ln E[exp(h(W))]` for `W ~ N(0, 1)`, evaluated in log space.
    pub fn log_expect<F: FnMut(f64) -> f64>(&self, mut log_g: F) -> f64 {
        let terms: Vec<f64> = self.nodes.iter().zip(&self.log_weights).map(|(&w, &lw)| lw + log_g(w)).collect();
        logsumexp(&terms)
    }
}

/// Orthonormal Hermite functions `psi_n(x)` and `psi_{n-1}(x)`.
fn hermite_functions(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 0.0;
    let mut p = PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * p - (kf / (kf + 1.0)).sqrt() * p_prev;
        p_prev = p;
        p = next;
    }
    (p, p_prev)
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let n = order;
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() <= 1e-16 {
                    dp = legendre(n, z).1;
                    break;
                }
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `∫_a^b f(t) dt`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * neumaier_sum(self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(mid + half * t)))
    }
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_weights_sum_to_one() {
        for order in [1, 2, 5, 20, 200, 400] {
            let gh = GaussHermite::new(order);
            let s = gh.expect(|_| 1.0);
            assert!((s - 1.0).abs() < 1e-13, "order {order}: {s}");
        }
    }

    #[test]
    fn hermite_reproduces_gaussian_moments() {
        let gh = GaussHermite::new(20);
        assert!(gh.expect(|w| w).abs() < 1e-14);
        assert!((gh.expect(|w| w * w) - 1.0).abs() < 1e-13);
        assert!((gh.expect(|w| w.powi(4)) - 3.0).abs() < 1e-12);
        assert!((gh.expect(|w| w.powi(6)) - 15.0).abs() < 1e-11);
    }

    #[test]
    fn hermite_exponential_moments_stay_accurate_at_high_order() {
        // E[exp(c W)] = exp(c^2 / 2); large c probes the tail weights.
        for order in [200, 400] {
            let gh = GaussHermite::cached(order);
            for c in [0.25, 1.0, 2.0, 4.0, 8.0] {
                let exact = 0.5 * c * c;
                let got = gh.log_expect(|w| c * w);
                assert!((got - exact).abs() < 1e-11, "order {order}, c {c}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let gl = GaussLegendre::new(8);
        let v = gl.integrate(0.0, 2.0, |t| t.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        let odd = GaussLegendre::new(7);
        assert!(odd.nodes[3].abs() < 1e-15);
    }
}
