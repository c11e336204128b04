//! A numerical laboratory for steepest-descent flows on deep diagonal
//! linear reparameterizations `x = w_1 ⊙ ... ⊙ w_L` and the separable
//! mirror geometry they induce.
//!
//! The crate is organized around the objects of that correspondence:
//!
//! - [`numerics`]: root solving, quadrature, finite differences and the
//!   seeded RNG contract;
//! - [`reparam`]: layer stacks, products, per-layer gradients and saddle
//!   diagnostics;
//! - [`geometry`]: balance equations, implicit and closed-form mirror
//!   metrics, Legendre values, stability classes, coercivity and induced
//!   regularizers;
//! - [`problems`]: synthetic regression/classification tasks with their
//!   losses and margin metrics;
//! - [`flows`]: the discrete steppers (steepest family and Adam), the
//!   trajectory recorder and the x-space mirror integrator;
//! - [`experiments`]: scenario runners (saddle escape, implicit-bias
//!   regression, classification margins, balance tables, trajectory
//!   equivalence, coercivity checks) with CSV/JSON output.
//!
//! Experiment grids run data-parallel over grid points via rayon when the
//! default `parallel` feature is enabled; results are merged by grid key,
//! so outputs are byte-identical with or without it.

// Validation sites use `!(x > 0.0)` so NaN inputs fail closed; `x <= 0.0`
// would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod flows;
pub mod geometry;
pub mod io;
pub mod numerics;
pub mod problems;
pub mod reparam;

pub use error::{Error, Result};
