//! Dense vector and matrix primitives, symmetric tridiagonal solvers and the
//! finite-difference helpers used to validate analytic derivatives.

mod dense;
mod fd;
mod tridiag;
pub mod vector;

pub use dense::{dense_solve, lu_solve, random_orthogonal, spd_with_spectrum, DenseMatrix};
pub use fd::{finite_diff_gradient, DEFAULT_FD_STEP};
pub use tridiag::{solve_sym_tridiag, tridiag_least_squares, SymTridiagonal};

use thiserror::Error;

/// Failures of the direct solvers. All of them are recoverable by the
/// caller (restart, fall back to another correction, or report).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("pivot {index} has magnitude {pivot:e}, below the singularity guard")]
    NearSingular { index: usize, pivot: f64 },
    #[error("least-squares matrix is rank deficient (diagonal ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}
