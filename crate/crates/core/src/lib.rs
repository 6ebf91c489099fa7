//! Block proximal iteratively reweighted minimization with extrapolation.
//!
//! The crate solves problems of the form
//!
//! ```text
//! minimize  f(x) + λ Σ_j h(g(x_j))
//! ```
//!
//! where `f` has block-Lipschitz gradient, `g` is a nonnegative convex scalar
//! map and `h` is concave and increasing. Each iteration picks one block,
//! extrapolates it from its two previous values, and solves a weighted
//! proximal subproblem obtained by linearising `h` at the current iterate.
//!
//! Modules:
//! - [`model`]: block partitions, smooth losses, penalties, objective evaluation.
//! - [`prox`]: scalar weighted proximal maps and the block subproblem solver.
//! - [`solver`]: the block reweighted loop with momentum, safeguard and diagnostics.
//! - [`lp`]: the smoothed ℓp specialisation with adaptive smoothing factors.
//! - [`baselines`]: PIRE, PIRE-PS, PIRE-AU, IRL1 and IRL1 with FISTA momentum.
//! - [`experiments`]: seeded synthetic instances and the comparison harness.
//! - [`instance`] / [`config`]: JSON file formats used by the CLI.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algo;
pub mod baselines;
pub mod config;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod prox;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use model::{BlockPartition, LeastSquares, MatrixLeastSquares, Penalty, Problem, SmoothLoss};
pub use solver::{solve, SolveOutput, SolverConfig, Status};
