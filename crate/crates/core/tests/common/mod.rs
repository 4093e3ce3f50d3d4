//! Property checks shared by the `properties` suite and acceptance criterion 11.
//!
//! Each check returns `Err(message)` on the first violated property so the
//! callers can wrap it in whatever runner they use.

#![allow(dead_code)]

use proptest::prelude::*;
use walkdual_core::bsm::v_bsm;
use walkdual_core::conjugate::{conjugate_u, power_utility};
use walkdual_core::esscher::solve_esscher;
use walkdual_core::lattice::{standardize, terminal_distribution};
use walkdual_core::{Atom, DiscreteEconomy, FiniteRV, UtilitySpec};

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Brute-force `sup_x [U(x) - x y]` by a fine log grid and golden refinement,
/// kept separate from the library's own conjugate code.
fn sup_by_search(u: &UtilitySpec, y: f64) -> f64 {
    let f = |t: f64| u.u(t.exp()).unwrap() - t.exp() * y;
    let (mut best_t, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 0..=4000 {
        let t = -40.0 + 0.02 * i as f64;
        let v = f(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let (mut a, mut b) = (best_t - 0.02, best_t + 0.02);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

/// `U -> V -> U` for CRRA: the closed-form conjugate matches a brute-force
/// supremum, and numerical inversion of `V` returns `U`.
pub fn crra_roundtrip(gamma: f64, x: f64) -> Check {
    let spec = UtilitySpec::crra(gamma).map_err(|e| e.to_string())?;
    let y = spec.u_prime(x).map_err(|e| e.to_string())?;
    let v = spec.v(y).map_err(|e| e.to_string())?;
    let brute = sup_by_search(&spec, y);
    ensure(rel(v, brute) <= 1e-6, || format!("γ={gamma} y={y}: V {v} vs sup {brute}"))?;
    let back = conjugate_u(&spec, x).map_err(|e| e.to_string())?.value;
    let u = spec.u(x).map_err(|e| e.to_string())?;
    ensure(rel(back, u) <= 1e-6, || format!("γ={gamma} x={x}: inf {back} vs U {u}"))
}

/// Power conjugate `β y^{-α}`: numerical inversion against the closed primal.
pub fn power_roundtrip(alpha: f64, beta: f64, x: f64) -> Check {
    let spec = UtilitySpec::power_conjugate(alpha, beta).map_err(|e| e.to_string())?;
    let back = conjugate_u(&spec, x).map_err(|e| e.to_string())?.value;
    let closed = power_utility(alpha, beta, x);
    ensure(rel(back, closed) <= 1e-6, || format!("α={alpha} β={beta} x={x}: {back} vs {closed}"))
}

/// `U(α β y₀^{-α-1}) = (1 + α) β y₀^{-α}`.
pub fn power_identity(alpha: f64, beta: f64, y0: f64) -> Check {
    let x0 = alpha * beta * y0.powf(-alpha - 1.0);
    let lhs = power_utility(alpha, beta, x0);
    let rhs = (1.0 + alpha) * beta * y0.powf(-alpha);
    ensure(rel(lhs, rhs) <= 1e-10, || format!("α={alpha} β={beta} y0={y0}: {lhs} vs {rhs}"))
}

/// Mass, mean, variance and strict ordering of the lattice law.
pub fn lattice_invariants(rv: &FiniteRV, n: usize) -> Check {
    let d = terminal_distribution(rv, n, 1e-9).map_err(|e| e.to_string())?;
    let (mass, mean, var) = d.moments();
    ensure((mass - 1.0).abs() <= 1e-12, || format!("n={n}: mass {mass}"))?;
    ensure(mean.abs() <= 1e-9, || format!("n={n}: mean {mean}"))?;
    ensure((var - 1.0).abs() <= 1e-9, || format!("n={n}: variance {var}"))?;
    ensure(d.points.windows(2).all(|w| w[0].w < w[1].w), || format!("n={n}: support not increasing"))?;
    ensure(d.points.iter().all(|p| p.prob > 0.0), || format!("n={n}: nonpositive probability"))
}

/// `E[Z_n] = 1` and `E[Z_n e^{ω(1)}] = 1` on the lattice.
pub fn esscher_identities(rv: &FiniteRV, n: usize) -> Check {
    let p = solve_esscher(rv, n).map_err(|e| e.to_string())?;
    let d = terminal_distribution(rv, n, 1e-9).map_err(|e| e.to_string())?;
    let norm = d.expect(|w| p.z_n(w)).map_err(|e| e.to_string())?;
    let mart = d.expect(|w| p.z_n(w) * w.exp()).map_err(|e| e.to_string())?;
    ensure((norm - 1.0).abs() <= 1e-10, || format!("n={n}: E[Z_n] = {norm}"))?;
    ensure((mart - 1.0).abs() <= 1e-10, || format!("n={n}: E[Z_n S] = {mart}"))
}

fn convex_decreasing(ys: &[f64], vs: &[f64], slack: f64) -> Check {
    for i in 1..vs.len() {
        ensure(vs[i] < vs[i - 1], || format!("not decreasing at y={}", ys[i]))?;
    }
    for i in 1..vs.len() - 1 {
        // Second divided difference on the (possibly uneven) grid.
        let l = (vs[i] - vs[i - 1]) / (ys[i] - ys[i - 1]);
        let r = (vs[i + 1] - vs[i]) / (ys[i + 1] - ys[i]);
        ensure(r - l >= -slack * l.abs(), || format!("not convex at y={}", ys[i]))?;
    }
    Ok(())
}

/// Continuous and discrete dual values are convex and decreasing in `y`.
pub fn dual_convexity(rv: &FiniteRV, n: usize, gamma: f64) -> Check {
    let spec = UtilitySpec::crra(gamma).map_err(|e| e.to_string())?;
    let ys: Vec<f64> = (0..25).map(|i| 0.2 * 1.15f64.powi(i)).collect();
    let econ = DiscreteEconomy::new(rv, n, 1e-9).map_err(|e| e.to_string())?;
    let mut cont = Vec::new();
    let mut disc = Vec::new();
    for &y in &ys {
        cont.push(v_bsm(&spec, y, 200).map_err(|e| e.to_string())?);
        disc.push(econ.v_n_zn(&spec, y).map_err(|e| e.to_string())?);
    }
    convex_decreasing(&ys, &cont, 1e-9).map_err(|e| format!("v_bsm: {e}"))?;
    convex_decreasing(&ys, &disc, 1e-9).map_err(|e| format!("v_n_Zn (n={n}): {e}"))
}

/// Two to four atoms with random values and probabilities, standardized.
pub fn arb_rv() -> impl Strategy<Value = FiniteRV> {
    prop::collection::vec((-3.0f64..3.0, 0.05f64..1.0), 2..=4).prop_filter_map("degenerate", |raw| {
        let total: f64 = raw.iter().map(|r| r.1).sum();
        let mut atoms: Vec<Atom> = raw.iter().map(|&(v, p)| Atom { value: v, prob: p / total }).collect();
        // Renormalize the last atom so the mass is 1 to rounding.
        let head: f64 = atoms[..atoms.len() - 1].iter().map(|a| a.prob).sum();
        atoms.last_mut().unwrap().prob = 1.0 - head;
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        if atoms.windows(2).any(|w| w[1].value - w[0].value < 1e-3) {
            return None;
        }
        standardize(&atoms).ok()
    })
}
