//! Difference-of-convex programming with Bregman primal–dual inner solvers.
//!
//! The outer loop ([`dca`]) linearizes the concave part of `f = g - h` and
//! hands the convex subproblem to a Bregman primal–dual hybrid-gradient
//! engine ([`pdhg`]). Constraint sets are split into pieces whose
//! projections and log-det proximal operators have closed forms
//! ([`cones`]). Three log-det matrix programs from multi-user Gaussian
//! channel theory are provided in [`problems`], and [`diagnostics`]
//! measures the observed linear rate of the outer loop.
//!
//! All numerical code is generic over the scalar type (`f32` or `f64`)
//! through the [`Real`] trait. The `f64` aliases below are what the CLI and
//! reports use.

// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cones;
pub mod dca;
pub mod diagnostics;
pub mod error;
pub mod pdhg;
pub mod problems;
pub mod scalar;
pub mod symmat;

pub use error::{Error, Result};
pub use scalar::Real;
pub use symmat::{SpectralDecomp, SymMat};

/// Double-precision symmetric matrix.
pub type SymMatF64 = SymMat<f64>;
/// Single-precision symmetric matrix.
pub type SymMatF32 = SymMat<f32>;
/// Double-precision spectral decomposition.
pub type SpectralDecompF64 = SpectralDecomp<f64>;
/// Problem instance in double precision, the type stored in instance files.
pub type ProblemInstanceF64 = problems::ProblemInstance<f64>;
/// PDHG iterate in double precision.
pub type PdhgStateF64 = pdhg::PdhgState<f64>;
/// Outer-loop trace in double precision.
pub type DcaTraceF64 = dca::DcaTrace<f64>;
