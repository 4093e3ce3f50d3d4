//! Random-walk markets converging to Black–Scholes–Merton, their Esscher
//! martingale measures, and primal/dual expected-utility value functions.
//!
//! The crate is organized by computation:
//!
//! * [`lattice`]: innovations and the exact law of the scaled walk.
//! * [`conjugate`]: utility families and Legendre–Fenchel transforms.
//! * [`bsm`]: continuous-time kernel, dual values and power closed forms.
//! * [`esscher`]: the discrete martingale measure.
//! * [`duals`]: discrete dual values, relaxed primal values, tails.
//! * [`dp`]: the true discrete optimum by dynamic programming.
//! * [`counterexample`]: the growth certificate for a series conjugate.
//! * [`prop1b`]: conjugates with partially infinite dual values.

pub mod bsm;
pub mod conjugate;
pub mod counterexample;
pub mod dp;
pub mod duals;
pub mod error;
pub mod esscher;
pub mod lattice;
pub mod numeric;
pub mod prop1b;
pub mod quadrature;

pub use bsm::{Curvature, ValueCurve};
pub use conjugate::{Family, MajorantBound, SeriesTerm, UtilitySpec};
pub use counterexample::{CertificateRecord, CounterexampleCertificate};
pub use dp::{CrraDp, DpPoint, GridDp, RelaxationCheck, WealthGrid};
pub use duals::{DiscreteEconomy, DualEvalReport, Kernel};
pub use error::{Error, ErrorKind, Result};
pub use esscher::{EsscherParams, RatioBound};
pub use lattice::{Atom, FiniteRV, LatticeDistribution, LatticePoint};
pub use prop1b::{Classification, DivergenceScan};
