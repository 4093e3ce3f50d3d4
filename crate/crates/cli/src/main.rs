//! `walkdual`: batch front end for the numerical laboratory.
//!
//! Exit codes: 0 success, 2 invalid input or usage, 3 numerical failure,
//! 4 search failure, 1 for I/O errors while writing output.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use config::{Format, RunConfig};
use walkdual_core::error::ErrorKind;

#[derive(Parser)]
#[command(name = "walkdual", version, about = "Random-walk markets and their dual value functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Innovation: JSON, a path to JSON, or symmetric-binomial,
    /// asymmetric-binomial, trinomial.
    #[arg(long, global = true)]
    rv: Option<String>,
    /// Utility spec: JSON or a path to JSON.
    #[arg(long, global = true)]
    utility: Option<String>,
    /// Numbers of steps: a comma list or start:stop:step.
    #[arg(long, global = true)]
    n: Option<String>,
    /// Dual arguments: a comma list or start:stop:step.
    #[arg(long, global = true)]
    y: Option<String>,
    /// Initial wealth levels: a comma list or start:stop:step.
    #[arg(long, global = true)]
    x: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Support merge tolerance for lattice laws.
    #[arg(long, global = true)]
    merge_tol: Option<f64>,
    /// Gauss–Hermite order for continuous-time dual values.
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Assert that no random number generator is involved (none ever is).
    #[arg(long, global = true)]
    seedless: bool,
    /// JSON config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an innovation and tabulate its lattice laws.
    RvCheck,
    /// Esscher parameters a_n, b_n and the third-moment expansion.
    Esscher,
    /// Laplace transform of the scaled walk against its Gaussian limit.
    Lemma1 {
        /// Exponents: a comma list or start:stop:step (default 1).
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Discrete dual values under both kernels next to the continuous one.
    DualCurve {
        /// Report tails beyond this cutoff instead of the curve.
        #[arg(long)]
        tail_m: Option<f64>,
    },
    /// True discrete optimum by dynamic programming.
    Dp,
    /// Dynamic-programming optimum against the relaxed (dual) bound.
    RelaxCompare,
    /// Search for the counterexample certificate.
    Counterex {
        #[arg(long)]
        kmax: Option<u32>,
        /// Candidate λ values: a comma list or start:stop:step.
        #[arg(long)]
        lambda_grid: Option<String>,
        /// Largest n tried for any k.
        #[arg(long)]
        n_cap: Option<u64>,
    },
    /// Divergence scan of the reciprocal-density conjugate.
    Prop1b {
        /// y values to scan: a comma list or start:stop:step.
        #[arg(long)]
        scan_y: Option<String>,
        /// Move the divergence threshold to y0.
        #[arg(long)]
        y0: Option<f64>,
        /// Upper end of the scanned region (default: largest checked z0 <= 0.1).
        #[arg(long)]
        z0: Option<f64>,
    },
}

fn flags_config(cli: &Cli) -> RunConfig {
    let c = &cli.common;
    let mut cfg = RunConfig {
        rv: c.rv.clone().map(serde_json::Value::String),
        utility: c.utility.clone().map(serde_json::Value::String),
        n: c.n.clone(),
        y: c.y.clone(),
        x: c.x.clone(),
        out: c.out.clone(),
        format: c.format,
        merge_tol: c.merge_tol,
        quad_order: c.quad_order,
        ..RunConfig::default()
    };
    match &cli.command {
        Command::Lemma1 { gamma } => cfg.gamma = gamma.clone(),
        Command::DualCurve { tail_m } => cfg.tail_m = *tail_m,
        Command::Counterex { kmax, lambda_grid, n_cap } => {
            cfg.kmax = *kmax;
            cfg.lambda_grid = lambda_grid.clone();
            cfg.n_cap = *n_cap;
        }
        Command::Prop1b { scan_y, y0, z0 } => {
            cfg.scan_y = scan_y.clone();
            cfg.y0 = *y0;
            cfg.z0 = *z0;
        }
        _ => {}
    }
    cfg
}

/// Failure to write the result, as opposed to failure to compute it.
#[derive(Debug)]
struct OutputError(std::io::Error);

impl std::fmt::Display for OutputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for OutputError {}

/// Temp file in the target directory, then rename.
fn write_atomic(path: &Path, body: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(body.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let flags = flags_config(&cli);
    let cfg = match &cli.common.config {
        Some(p) => RunConfig::load(p)?.merge(flags),
        None => flags,
    };
    let out = match cli.command {
        Command::RvCheck => commands::rv_check(&cfg),
        Command::Esscher => commands::esscher(&cfg),
        Command::Lemma1 { .. } => commands::lemma1(&cfg),
        Command::DualCurve { .. } => commands::dual_curve(&cfg),
        Command::Dp => commands::dp(&cfg),
        Command::RelaxCompare => commands::relax_compare(&cfg),
        Command::Counterex { .. } => commands::counterex(&cfg),
        Command::Prop1b { .. } => commands::prop1b(&cfg),
    }?;
    let seedless = if cli.common.seedless { " [seedless]" } else { "" };
    match &cfg.out {
        Some(path) => {
            write_atomic(path, &out.body)
                .map_err(OutputError)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("{}{seedless} -> {}", out.summary, path.display());
        }
        None => {
            std::io::stdout().write_all(out.body.as_bytes()).map_err(OutputError).context("writing stdout")?;
            eprintln!("{}{seedless}", out.summary);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.chain().find_map(|e| e.downcast_ref::<walkdual_core::Error>()) {
        return match e.kind() {
            ErrorKind::Validation => 2,
            ErrorKind::Numeric => 3,
            ErrorKind::Search => 4,
        };
    }
    if err.chain().any(|e| e.downcast_ref::<OutputError>().is_some()) {
        return 1;
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
