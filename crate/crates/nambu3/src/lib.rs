//! Canonical transformations in three-dimensional Nambu phase space.
//!
//! The phase space is `R³` with coordinates `x1, x2, x3` (plus time `t` as
//! an independent variable), dynamics are driven by a pair of Hamilton
//! functions through the ternary Nambu bracket
//! `{f, g, h} = det ∂(f,g,h)/∂(x1,x2,x3)`, and a canonical transformation
//! is a phase-space map with unit bracket `{X1,X2,X3} = 1`.
//!
//! The crate provides:
//!
//! - [`expr`] — expression trees, parsing, exact differentiation, numeric
//!   evaluation, and sampling-based equivalence testing;
//! - [`dynamics`] — the Nambu bracket, equations of motion, and a
//!   fixed-step RK4 integrator with invariant-drift reporting;
//! - [`canonical`] — phase-space maps, canonoid/canonical classification,
//!   direct conditions, Hamiltonian transport, and covariance checks;
//! - [`genfun`] — generating-function verification (coefficient system,
//!   Pfaffian residuals, time-part identity, closed-two-form check);
//! - [`lie`] — infinitesimal canonical transformations, Lie-series
//!   exponentiation, and numeric flow cross-validation;
//! - [`decompose`] — primitive transformation constructors and sequence
//!   composition;
//! - [`registry`] — ready-made example systems used by the CLI self test.

pub mod canonical;
pub mod decompose;
pub mod dynamics;
pub mod expr;
pub mod genfun;
pub mod lie;
pub mod registry;
pub mod report;
pub mod selftest;

pub use canonical::{CanonicityVerdict, PhaseMap};
pub use dynamics::{nambu_bracket, HamiltonPair, Trajectory, VectorField};
pub use expr::{Domain, Expr, Point, Var};
pub use genfun::{ABCTriple, GenFunPair};
pub use lie::GeneratorPair;
pub use report::{CheckReport, IdentityCheck};

/// Crate-level error type; wraps the module-specific failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] expr::ParseError),
    #[error(transparent)]
    Eval(#[from] expr::EvalError),
    #[error(transparent)]
    Equiv(#[from] expr::EquivError),
    #[error("the map has no inverse; this operation needs one")]
    MissingInverse,
    #[error("the map is time dependent; this operation requires a time-independent map")]
    TimeDependentMap,
    #[error("generator functions must be time independent")]
    TimeDependentGenerator,
    #[error("{0}")]
    InvalidInput(String),
    #[error("Newton inversion did not converge within {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("trajectory left the finite domain at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("expression grew past {limit} nodes while building the series (order {order})")]
    ExpressionBlowup { limit: usize, order: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
