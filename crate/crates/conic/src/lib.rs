//! Primal-dual interior-point solver for problems of the form
//!
//! ```text
//! minimize    cᵀy
//! subject to  S_j(y) = C_j + Σ_i y_i A_{j,i} ⪰ 0     for every block j
//!             E y = h
//! ```
//!
//! Blocks are real symmetric PSD cones or nonnegative orthants. The search
//! direction is HKM with Mehrotra predictor-corrector steps, started from an
//! infeasible point.
//!
//! Dense blocks describe their coefficient matrices through a (possibly
//! shared) low-dimensional coordinate map `z = L y`, so that
//! `S(y) = C + Σ_k z_k Ψ_k`. When many blocks depend on `y` only through a
//! handful of coordinates, the Schur complement is assembled as `Lᵀ K L`
//! instead of from all pairs of coefficient matrices.

mod problem;
mod solver;

pub use problem::{Block, BlockValue, DenseBlock, NonnegBlock, Problem, SparseBlock};
pub use solver::{solve, Settings, Solution, Status};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("numerical breakdown at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },
}
