//! Variable-exponent function spaces and a solver for degenerate elliptic
//! Dirichlet problems of the form `-Δ(|u|^{p(x)-2} u) + a(x, u) = h`.
//!
//! Every numerical routine is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64` and `*F32` aliases below name the common instantiations.

pub mod discrete;
pub mod error;
pub mod estimates;
pub mod exponent;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod modular;
pub mod pn;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod transform;

pub use error::{Error, Result};
pub use exponent::{
    beta_fields, conjugate, critical_exponents, derived_fields, mu_fields, partition, BetaFields,
    CriticalExponents, DerivedFields, DomainPartition, Exponent, ExponentField, MuFields, Region,
};
pub use estimates::{check_hypotheses, CheckConfig, CheckStatus, HypothesisReport};
pub use expr::Expr;
pub use grid::{format_sci, Axis, Grid, GridFunction};
pub use problem::{Coefficients, Nonlinearity, ProblemKind, ProblemSpec};
pub use scalar::Scalar;
pub use solver::{solve, solve_main, solve_reduced, SolveReport, SolveStatus, SolverConfig};

pub type GridF64 = Grid<f64>;
pub type GridF32 = Grid<f32>;
pub type GridFunctionF64 = GridFunction<f64>;
pub type GridFunctionF32 = GridFunction<f32>;
pub type ExponentFieldF64 = ExponentField<f64>;
pub type ExponentFieldF32 = ExponentField<f32>;
pub type ProblemSpecF64 = ProblemSpec<f64>;
pub type ProblemSpecF32 = ProblemSpec<f32>;
pub type SolverConfigF64 = SolverConfig<f64>;
pub type SolverConfigF32 = SolverConfig<f32>;
pub type SolveReportF64 = SolveReport<f64>;
pub type SolveReportF32 = SolveReport<f32>;
