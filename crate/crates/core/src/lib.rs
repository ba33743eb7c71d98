//! Continuity method for the complex Monge-Ampère family
//! `(tω + dd^c log ω^n + dd^c u_t)^n = e^{u_t} ω^n` on flat complex tori of
//! dimension one and two, together with numerical checks of the a-priori
//! estimates that control the path `t -> 0`.
//!
//! Layout:
//! - [`grid`], [`calculus`]: periodic grids, fields and the spectral Kähler calculus.
//! - [`curvature`]: curvature tensor and holomorphic sectional curvature bounds.
//! - [`solver`]: Newton-Krylov solver for `(MA)_t` at fixed `t`.
//! - [`path`]: continuation in `t` and volume extrapolation.
//! - [`estimates`]: checkers for the pointwise and integral estimates.

// `!(x > 0.0)` is deliberate throughout: NaN must fail the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod curvature;
pub mod error;
pub mod estimates;
pub mod grid;
pub mod hermitian;
pub mod io;
pub mod path;
pub mod solver;
pub(crate) mod spectral;
pub mod testbed;

pub use calculus::{
    accurate_sum, ddc, grad_norm_sq, integrate, laplacian, log_ratio_det, metric_from_potential,
    min_eigenvalue, trace_s, InverseMetric,
};
pub use error::{Error, Result};
pub use grid::{HermitianField, ScalarField, TorusGrid};
pub use num_complex::Complex64;
pub use solver::{
    linearized_apply, residual, solve_at_t, solve_linear, ContinuityState, ProblemData,
    SolverConfig,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
