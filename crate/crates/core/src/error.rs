use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid random variable: {0}")]
    InvalidRv(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lattice grew to {points} points (cap {cap}) at step {step}; use a smaller n or a larger merge tolerance")]
    LatticeTooLarge { points: usize, cap: usize, step: usize },

    #[error("integrand is not finite at w = {w} (value {value})")]
    NonFinite { w: f64, value: f64 },

    #[error("root finder could not bracket a sign change on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("objective is unbounded below; bracket expansion reached log y = {log_y}")]
    Unbounded { log_y: f64 },

    #[error("utility must be positive on the grid, found U({x}) = {value}; shift U by a constant first")]
    Normalization { x: f64, value: f64 },

    #[error("dual function must be positive on the grid, found V({y}) = {value}; shift U by a constant first")]
    NonPositiveDual { y: f64, value: f64 },

    #[error("quadrature diverges: order {order} gives {value}, order {doubled} gives {doubled_value}")]
    Divergence { order: usize, value: f64, doubled: usize, doubled_value: f64 },

    #[error("{fraction:.3e} of the probability mass left the wealth grid (limit 1e-3)")]
    GridExit { fraction: f64 },

    #[error("no Laplace-transform margin over the normal on the grid (third moment {third_moment}, best margin {best_margin:e})")]
    NoMargin { third_moment: f64, best_margin: f64 },

    #[error("search for n_k exhausted at k = {k} (n up to {n_max}); best log2 M = {best_log2_m} < {target}")]
    SearchExhausted { k: u32, n_max: u64, best_log2_m: f64, target: f64 },
}

/// Coarse failure classes; the CLI maps these onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numeric,
    Search,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidRv(_)
            | Error::InvalidArgument(_)
            | Error::Normalization { .. }
            | Error::NonPositiveDual { .. } => ErrorKind::Validation,
            Error::LatticeTooLarge { .. }
            | Error::NonFinite { .. }
            | Error::Bracket { .. }
            | Error::Unbounded { .. }
            | Error::Divergence { .. }
            | Error::GridExit { .. } => ErrorKind::Numeric,
            Error::NoMargin { .. } | Error::SearchExhausted { .. } => ErrorKind::Search,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
