//! Matrix-free hyper-gradient machinery for bilevel optimisation:
//! dense and tridiagonal kernels, an incremental Lanczos process, the
//! LancBiO/SubBiO solvers with reference baselines, and a set of
//! benchmark problems with closed-form oracles.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN

extern crate alloc;

pub mod bilevel;
pub mod check;
pub mod krylov;
pub mod numeric;
pub mod problems;
pub mod solvers;

pub use bilevel::{BilevelOracles, Counted, EvalCounters};
pub use solvers::{run, RunResult, SolverConfig, SolverKind, TraceRecord};
