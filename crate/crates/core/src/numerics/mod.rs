//! Scalar numerics shared by every other module: the implicit-metric root
//! solve, adaptive quadrature, finite-difference gradients, and the seeded
//! RNG contract.

mod fdiff;
mod quad;
mod rng;
mod root;

pub use fdiff::finite_diff_grad;
pub use quad::integrate_1d;
pub use rng::{RngSpec, STREAM_MINIBATCH, STREAM_RESAMPLE, STREAM_TASK};
pub use root::{solve_unique_positive_root, RootProblem, DEFAULT_REL_TOL};
