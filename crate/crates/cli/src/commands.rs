//! One function per subcommand. Each returns the table body and a one-line
//! summary; writing is left to the caller.

use anyhow::Context;
use serde_json::{json, Value};
use walkdual_core::bsm::v_bsm;
use walkdual_core::counterexample::{find_lambda0, find_nk, growth_certificate, DEFAULT_N_CAP};
use walkdual_core::dp::{crra_dp, general_dp, verify_relaxation};
use walkdual_core::duals::{mgf_convergence, DualCurveRow};
use walkdual_core::esscher::{asymptotic_a, esscher_csv, ratio_bound_c, scaled_residual, solve_esscher};
use walkdual_core::lattice::terminal_distribution;
use walkdual_core::prop1b::{default_epsilons, default_z0, divergence_scan, shift_v, threshold};
use walkdual_core::{Classification, DiscreteEconomy, DualEvalReport, RelaxationCheck, UtilitySpec, WealthGrid};

use crate::config::{Format, RunConfig};

pub struct Output {
    pub body: String,
    pub summary: String,
}

fn render(format: Format, csv: String, json: Value) -> String {
    match format {
        Format::Csv => csv,
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&json).expect("JSON values serialize");
            s.push('\n');
            s
        }
    }
}

fn format_of(cfg: &RunConfig) -> Format {
    cfg.format.unwrap_or(Format::Csv)
}

pub fn rv_check(cfg: &RunConfig) -> anyhow::Result<Output> {
    let rv = cfg.rv()?;
    let ns = if cfg.n.is_some() { cfg.n_list()? } else { vec![1] };
    let tol = cfg.merge_tol()?;
    let mut csv = String::from("n,points,mass,mean,second_moment,min_w,max_w\n");
    let mut rows = Vec::new();
    for &n in &ns {
        let d = terminal_distribution(&rv, n, tol)?;
        let (mass, mean, m2) = d.moments();
        csv.push_str(&format!("{n},{},{mass},{mean},{m2},{},{}\n", d.len(), d.min_w(), d.max_w()));
        rows.push(json!({"n": n, "points": d.len(), "mass": mass, "mean": mean,
            "second_moment": m2, "min_w": d.min_w(), "max_w": d.max_w()}));
    }
    let summary = format!(
        "innovation ok: {} atoms, third moment {}, support bound {}",
        rv.atoms().len(),
        rv.third_moment(),
        rv.support_bound()
    );
    let json = json!({"atoms": rv.atoms(), "third_moment": rv.third_moment(), "lattices": rows});
    Ok(Output { body: render(format_of(cfg), csv, json), summary })
}

pub fn esscher(cfg: &RunConfig) -> anyhow::Result<Output> {
    let rv = cfg.rv()?;
    let ns = cfg.n_list()?;
    let params = ns.iter().map(|&n| solve_esscher(&rv, n)).collect::<Result<Vec<_>, _>>()?;
    let bound = ratio_bound_c(&rv, &ns)?;
    let json = Value::Array(
        params
            .iter()
            .map(|p| {
                json!({"n": p.n, "a_n": p.a, "b_n": p.b, "asymptotic_a": asymptotic_a(&rv, p.n),
                    "scaled_residual": scaled_residual(&rv, p)})
            })
            .collect(),
    );
    let summary = format!("{} Esscher solves; density ratio bound C = {}", params.len(), bound.c);
    Ok(Output { body: render(format_of(cfg), esscher_csv(&rv, &params), json), summary })
}

pub fn lemma1(cfg: &RunConfig) -> anyhow::Result<Output> {
    let rv = cfg.rv()?;
    let ns = cfg.n_list()?;
    let gammas = match &cfg.gamma {
        Some(_) => cfg.grid(&cfg.gamma, "--gamma")?,
        None => vec![1.0],
    };
    let mut csv = String::from("n,gamma,mgf_discrete,mgf_limit,relative_gap\n");
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &g in &gammas {
        for &n in &ns {
            let m = mgf_convergence(&rv, g, n);
            let gap = m.relative_gap();
            worst = worst.max(gap.abs());
            csv.push_str(&format!("{n},{g},{},{},{gap}\n", m.discrete(), m.limit()));
            rows.push(json!({"n": n, "gamma": g, "mgf_discrete": m.discrete(),
                "mgf_limit": m.limit(), "relative_gap": gap}));
        }
    }
    let summary = format!("{} rows; largest |relative gap| {worst}", rows.len());
    Ok(Output { body: render(format_of(cfg), csv, Value::Array(rows)), summary })
}

pub fn dual_curve(cfg: &RunConfig) -> anyhow::Result<Output> {
    let rv = cfg.rv()?;
    let spec = cfg.utility()?;
    let ns = cfg.n_list()?;
    let ys = cfg.grid(&cfg.y, "--y")?;
    let (tol, q) = (cfg.merge_tol()?, cfg.quad_order()?);
    if let Some(m) = cfg.tail_m {
        let mut csv = String::from(DualEvalReport::CSV_HEADER);
        let mut rows = Vec::new();
        for &n in &ns {
            let econ = DiscreteEconomy::new(&rv, n, tol)?;
            for &y in &ys {
                let r = econ.tail_report(&spec, y, m)?;
                csv.push_str(&r.csv_row());
                rows.push(serde_json::to_value(r)?);
            }
        }
        let summary = format!("{} tail rows at M = {m}", rows.len());
        return Ok(Output { body: render(format_of(cfg), csv, Value::Array(rows)), summary });
    }
    let limits = ys.iter().map(|&y| v_bsm(&spec, y, q)).collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from(DualCurveRow::CSV_HEADER);
    let mut rows = Vec::new();
    for &n in &ns {
        let econ = DiscreteEconomy::new(&rv, n, tol)?;
        for (&y, &v) in ys.iter().zip(&limits) {
            let r = DualCurveRow { n, y, v_n_z: econ.v_n_z(&spec, y)?, v_n_zn: econ.v_n_zn(&spec, y)?, v_bsm: v };
            csv.push_str(&r.csv_row());
            rows.push(json!({"n": n, "y": y, "v_n_Z": r.v_n_z, "v_n_Zn": r.v_n_zn, "v_bsm": v,
                "gap_Z": r.v_n_z - v, "gap_Zn": r.v_n_zn - r.v_n_z}));
        }
    }
    let summary = format!("{} dual-curve rows for {} values of n", rows.len(), ns.len());
    Ok(Output { body: render(format_of(cfg), csv, Value::Array(rows)), summary })
}

pub fn dp(cfg: &RunConfig) -> anyhow::Result<Output> {
    let rv = cfg.rv()?;
    let spec = cfg.utility()?;
    let ns = cfg.n_list()?;
    let xs = cfg.grid(&cfg.x, "--x")?;
    if xs[0] <= 0.0 {
        anyhow::bail!("--x must be positive");
    }
    let mut csv = String::from("n,x,u_dp,theta,exit_fraction\n");
    let mut rows = Vec::new();
    let mut push = |n: usize, x: f64, u: f64, theta: f64, exit: f64| {
        csv.push_str(&format!("{n},{x},{u},{theta},{exit}\n"));
        rows.push(json!({"n": n, "x": x, "u_dp": u, "theta": theta, "exit_fraction": exit}));
    };
    for &n in &ns {
        match spec.crra_gamma() {
            Some(g) => {
                let c = crra_dp(&rv, n, g)?;
                for &x in &xs {
                    push(n, x, c.value_at(x), c.theta, 0.0);
                }
            }
            None => {
                // One grid covers the whole x range.
                let around = WealthGrid::around(1.0);
                let grid =
                    WealthGrid { points: around.points, low: xs[0] * 1e-4, high: xs[xs.len() - 1] * 1e4 }.fit_to(&spec);
                let g = general_dp(&rv, n, &spec, grid)?;
                for &x in &xs {
                    let p = g.value_at(x)?;
                    push(n, x, p.value, p.theta, p.exit_fraction);
                }
            }
        }
    }
    let summary = format!("{} optimal values ({} utility)", rows.len(), spec.family_id());
    Ok(Output { body: render(format_of(cfg), csv, Value::Array(rows)), summary })
}

pub fn relax_compare(cfg: &RunConfig) -> anyhow::Result<Output> {
    let rv = cfg.rv()?;
    let spec = cfg.utility()?;
    let ns = cfg.n_list()?;
    let xs = cfg.grid(&cfg.x, "--x")?;
    let tol = cfg.merge_tol()?;
    let mut csv = String::from(RelaxationCheck::CSV_HEADER);
    let mut rows = Vec::new();
    for &n in &ns {
        for &x in &xs {
            let c = verify_relaxation(&rv, n, &spec, x, tol)?;
            csv.push_str(&c.csv_row());
            rows.push(c);
        }
    }
    let bad = rows.iter().filter(|c| !c.ok).count();
    let summary = format!("{} cells, {} violate u_dp <= u_relaxed", rows.len(), bad);
    let json = serde_json::to_value(&rows)?;
    Ok(Output { body: render(format_of(cfg), csv, json), summary })
}

pub fn counterex(cfg: &RunConfig) -> anyhow::Result<Output> {
    let rv = cfg.rv()?;
    let k_max = cfg.kmax.unwrap_or(5);
    if k_max == 0 {
        anyhow::bail!("--kmax must be at least 1");
    }
    let grid = match &cfg.lambda_grid {
        Some(_) => cfg.grid(&cfg.lambda_grid, "--lambda-grid")?,
        None => (1..=10).map(|i| i as f64 / 10.0).collect(),
    };
    let lambda0 = find_lambda0(&rv, &grid)?;
    let cert = find_nk(&rv, lambda0, k_max, cfg.n_cap.unwrap_or(DEFAULT_N_CAP))?;
    let mut csv = String::from("k,n_k,alpha_k,log_beta_k,log2_M,log_x_k,y_k,x_growth_binding\n");
    for r in &cert.records {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.k, r.n_k, r.alpha_k, r.log_beta_k, r.log2_m, r.log_x_k, r.y_k, r.x_growth_binding
        ));
    }
    let body = match format_of(cfg) {
        Format::Csv => csv,
        Format::Json => {
            let mut v: Value = serde_json::from_str(&cert.to_json()).context("certificate JSON")?;
            v["growth"] = serde_json::to_value(growth_certificate(&cert, 1.0))?;
            v["series_v1"] = json!(cert.series_v1_from_normalization());
            let mut s = serde_json::to_string_pretty(&v)?;
            s.push('\n');
            s
        }
    };
    let slack = cert.records.iter().map(|r| r.log2_m - 2.0 * r.k as f64).fold(f64::INFINITY, f64::min);
    let summary = format!(
        "lambda0 = {lambda0}; {} records, n_k up to {}, min(log2 M - 2k) = {slack}",
        cert.records.len(),
        cert.records.last().map_or(0, |r| r.n_k)
    );
    Ok(Output { body, summary })
}

pub fn prop1b(cfg: &RunConfig) -> anyhow::Result<Output> {
    let ys = match &cfg.scan_y {
        Some(_) => cfg.grid(&cfg.scan_y, "--scan-y")?,
        None => cfg.grid(&Some("0.70:0.86:0.02".into()), "--scan-y")?,
    };
    if ys[0] <= 0.0 {
        anyhow::bail!("--scan-y must be positive");
    }
    let z0 = cfg.z0.unwrap_or_else(default_z0);
    let mut spec = UtilitySpec::prop1b_v0(z0)?;
    let mut pole = threshold();
    if let Some(y0) = cfg.y0 {
        spec = shift_v(&spec, y0)?;
        pole = y0;
    }
    let eps = default_epsilons(z0);
    let mut csv = String::from("y,epsilon,I_eps,slope,classification\n");
    let mut rows = Vec::new();
    let (mut last_div, mut first_conv) = (None, None);
    for &y in &ys {
        let s = divergence_scan(&spec, y, z0, &eps)?;
        csv.push_str(&s.csv_rows());
        match s.classification {
            Classification::Diverges => last_div = Some(y),
            Classification::Converges if first_conv.is_none() => first_conv = Some(y),
            _ => {}
        }
        rows.push(json!({"y": y, "slope": s.slope, "last_increment": s.last_increment,
            "classification": s.classification.as_str(), "epsilon": s.epsilons,
            "log_I_eps": s.log_integrals}));
    }
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
    let summary = format!(
        "z0 = {z0}; last diverging y = {}, first converging y = {}, expected threshold {pole}",
        fmt(last_div),
        fmt(first_conv)
    );
    Ok(Output { body: render(format_of(cfg), csv, Value::Array(rows)), summary })
}
