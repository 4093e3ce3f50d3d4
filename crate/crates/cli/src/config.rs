//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Deserialize;
use walkdual_core::{FiniteRV, UtilitySpec};

/// Everything a subcommand may read. Every field is optional so that a
/// config file and flags can each supply a part.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub rv: Option<serde_json::Value>,
    pub utility: Option<serde_json::Value>,
    pub n: Option<String>,
    pub y: Option<String>,
    pub x: Option<String>,
    pub kmax: Option<u32>,
    pub lambda_grid: Option<String>,
    pub gamma: Option<String>,
    pub tail_m: Option<f64>,
    pub scan_y: Option<String>,
    pub y0: Option<f64>,
    pub z0: Option<f64>,
    pub n_cap: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub merge_tol: Option<f64>,
    pub quad_order: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `other` win.
    pub fn merge(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $(if other.$f.is_some() { self.$f = other.$f; })* };
        }
        take!(
            rv,
            utility,
            n,
            y,
            x,
            kmax,
            lambda_grid,
            gamma,
            tail_m,
            scan_y,
            y0,
            z0,
            n_cap,
            out,
            format,
            merge_tol,
            quad_order
        );
        self
    }

    pub fn rv(&self) -> anyhow::Result<FiniteRV> {
        let Some(v) = &self.rv else { bail!("--rv is required for this command") };
        parse_rv(v)
    }

    pub fn utility(&self) -> anyhow::Result<UtilitySpec> {
        let Some(v) = &self.utility else { bail!("--utility is required for this command") };
        let v = resolve_json(v)?;
        serde_json::from_value(v).context("parsing --utility")
    }

    pub fn n_list(&self) -> anyhow::Result<Vec<usize>> {
        let Some(s) = &self.n else { bail!("--n is required for this command") };
        let xs = parse_grid(s).context("--n")?;
        xs.iter()
            .map(|&v| {
                if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                    Ok(v as usize)
                } else {
                    bail!("--n entries must be positive integers, got {v}")
                }
            })
            .collect()
    }

    pub fn grid(&self, value: &Option<String>, flag: &str) -> anyhow::Result<Vec<f64>> {
        let Some(s) = value else { bail!("{flag} is required for this command") };
        parse_grid(s).with_context(|| flag.to_string())
    }

    pub fn merge_tol(&self) -> anyhow::Result<f64> {
        let t = self.merge_tol.unwrap_or(walkdual_core::lattice::DEFAULT_MERGE_TOL);
        if !(t >= 0.0 && t.is_finite()) {
            bail!("--merge-tol must be a nonnegative number, got {t}");
        }
        Ok(t)
    }

    pub fn quad_order(&self) -> anyhow::Result<usize> {
        let q = self.quad_order.unwrap_or(walkdual_core::bsm::DEFAULT_QUAD_ORDER);
        if !(2..=640).contains(&q) || !q.is_multiple_of(2) {
            bail!("--quad-order must be an even number in [2, 640], got {q}");
        }
        Ok(q)
    }
}

/// Inline JSON, a file path holding JSON, or one of the named innovations.
fn resolve_json(v: &serde_json::Value) -> anyhow::Result<serde_json::Value> {
    match v {
        serde_json::Value::String(s) => {
            let t = s.trim_start();
            if t.starts_with('{') || t.starts_with('[') {
                return serde_json::from_str(t).context("inline JSON");
            }
            let text = std::fs::read_to_string(s).with_context(|| format!("reading {s}"))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {s}"))
        }
        other => Ok(other.clone()),
    }
}

pub fn parse_rv(v: &serde_json::Value) -> anyhow::Result<FiniteRV> {
    if let serde_json::Value::String(s) = v {
        match s.as_str() {
            "symmetric-binomial" => return Ok(FiniteRV::symmetric_binomial()),
            "asymmetric-binomial" => return Ok(FiniteRV::asymmetric_binomial()),
            "trinomial" => return Ok(FiniteRV::trinomial()),
            _ => {}
        }
    }
    let v = resolve_json(v)?;
    serde_json::from_value(v).context("parsing --rv")
}

/// `start:stop:step` (inclusive of `stop` up to rounding) or a comma list.
/// The result must be nonempty and strictly increasing.
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let s = s.trim();
    let out: Vec<f64> = if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number {p:?} in range {s:?}")))
            .collect::<anyhow::Result<_>>()?;
        let [start, stop, step] = parts[..] else { bail!("range {s:?} must be start:stop:step") };
        if !(step > 0.0 && start.is_finite() && stop.is_finite()) {
            bail!("range {s:?} needs a positive step and finite ends");
        }
        let count = ((stop - start) / step + 1e-9).floor();
        if count < 0.0 {
            bail!("range {s:?} is empty");
        }
        if count > 1e7 {
            bail!("range {s:?} has too many points");
        }
        // Points are rounded to the decimals written in the range, so
        // 0.70:0.86:0.02 yields 0.8 rather than 0.7999999999999999.
        let raw: Vec<&str> = s.split(':').map(str::trim).collect();
        let digits = decimals(raw[0]).zip(decimals(raw[2])).map(|(a, b)| a.max(b));
        (0..=count as usize)
            .map(|i| {
                let v = start + i as f64 * step;
                match digits {
                    Some(d) => format!("{v:.d$}").parse().expect("formatted float parses"),
                    None => v,
                }
            })
            .collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number {p:?} in list {s:?}")))
            .collect::<anyhow::Result<_>>()?
    };
    if out.is_empty() {
        bail!("grid {s:?} is empty");
    }
    if out.iter().any(|v| !v.is_finite()) {
        bail!("grid {s:?} has non-finite entries");
    }
    if out.windows(2).any(|w| w[1] <= w[0]) {
        bail!("grid {s:?} must be strictly increasing");
    }
    Ok(out)
}

/// Digits after the decimal point of a plain decimal literal; `None` for
/// exponent notation.
fn decimals(lit: &str) -> Option<usize> {
    if lit.contains(['e', 'E']) {
        return None;
    }
    Some(lit.split_once('.').map_or(0, |(_, f)| f.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_include_the_end_point() {
        assert_eq!(parse_grid("0.1:1.0:0.1").unwrap().len(), 10);
        let g = parse_grid("0.70:0.86:0.02").unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[5], 0.8);
        assert_eq!(parse_grid("1,4,16,64").unwrap(), vec![1.0, 4.0, 16.0, 64.0]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        assert!(parse_grid("1,1").is_err());
        assert!(parse_grid("3,2").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a,b").is_err());
        assert!(parse_grid("").is_err());
    }

    #[test]
    fn named_innovations() {
        let rv = parse_rv(&serde_json::Value::String("trinomial".into())).unwrap();
        assert_eq!(rv.atoms().len(), 3);
        let inline = r#"{"atoms":[{"value":-1,"prob":0.5},{"value":1,"prob":0.5}]}"#;
        assert_eq!(parse_rv(&serde_json::Value::String(inline.into())).unwrap(), FiniteRV::symmetric_binomial());
    }
}
