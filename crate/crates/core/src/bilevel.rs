//! The problem contract for bilevel solvers and the hyper-gradient pieces
//! built on top of it.

use alloc::vec::Vec;
use core::cell::Cell;
use thiserror::Error;

use crate::numeric::vector::{axpy, norm, sub};
use crate::numeric::{dense_solve, DenseMatrix, LinalgError};

/// First- and second-order oracles of an upper objective `f(x, y)` and a
/// lower objective `g(x, y)`.
///
/// `hvp_gyy` returns `∇²_yy g · v` (length `dim_y`) and `jvp_gxy` returns
/// `∇²_xy g · v` (length `dim_x`), the derivative in `x` of `⟨∇_y g, v⟩`.
pub trait BilevelOracles {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn f_value(&self, x: &[f64], y: &[f64]) -> f64;
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_f_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_f_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64>;
    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64>;
}

impl<P: BilevelOracles + ?Sized> BilevelOracles for &P {
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_y(&self) -> usize {
        (**self).dim_y()
    }
    fn f_value(&self, x: &[f64], y: &[f64]) -> f64 {
        (**self).f_value(x, y)
    }
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        (**self).g_value(x, y)
    }
    fn grad_f_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (**self).grad_f_x(x, y)
    }
    fn grad_f_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (**self).grad_f_y(x, y)
    }
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        (**self).grad_g_y(x, y)
    }
    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        (**self).hvp_gyy(x, y, v)
    }
    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        (**self).jvp_gxy(x, y, v)
    }
}

/// Oracle call tallies. `n_grad_f` covers both `∇_x f` and `∇_y f`;
/// `n_value` covers both `f` and `g`.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct EvalCounters {
    pub n_grad_f: u64,
    pub n_grad_g: u64,
    pub n_hvp: u64,
    pub n_jvp: u64,
    pub n_value: u64,
}

impl EvalCounters {
    pub fn n_grad(&self) -> u64 {
        self.n_grad_f + self.n_grad_g
    }
}

/// Wraps a problem and counts every oracle call made through it.
#[derive(Debug)]
pub struct Counted<P> {
    inner: P,
    counters: Cell<EvalCounters>,
}

impl<P: BilevelOracles> Counted<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            counters: Cell::new(EvalCounters::default()),
        }
    }

    pub fn counters(&self) -> EvalCounters {
        self.counters.get()
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    fn bump(&self, f: impl FnOnce(&mut EvalCounters)) {
        let mut c = self.counters.get();
        f(&mut c);
        self.counters.set(c);
    }
}

impl<P: BilevelOracles> BilevelOracles for Counted<P> {
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn f_value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.bump(|c| c.n_value += 1);
        self.inner.f_value(x, y)
    }
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.bump(|c| c.n_value += 1);
        self.inner.g_value(x, y)
    }
    fn grad_f_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.bump(|c| c.n_grad_f += 1);
        self.inner.grad_f_x(x, y)
    }
    fn grad_f_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.bump(|c| c.n_grad_f += 1);
        self.inner.grad_f_y(x, y)
    }
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.bump(|c| c.n_grad_g += 1);
        self.inner.grad_g_y(x, y)
    }
    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        self.bump(|c| c.n_hvp += 1);
        self.inner.hvp_gyy(x, y, v)
    }
    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        self.bump(|c| c.n_jvp += 1);
        self.inner.jvp_gxy(x, y, v)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BilevelError {
    #[error("lower-level solve stalled after {iters} iterations (‖∇_y g‖ = {grad_norm:e})")]
    NoConvergence { iters: usize, grad_norm: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Approximate hyper-gradient `∇_x f − ∇²_xy g · v` together with the
/// linear-system residual `‖∇²_yy g · v − ∇_y f‖`, both at the same `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGradEstimate {
    pub grad: Vec<f64>,
    pub residual_norm: f64,
}

impl HyperGradEstimate {
    pub fn from_parts(grad_f_x: &[f64], jvp: &[f64], av: &[f64], b: &[f64]) -> Self {
        Self {
            grad: sub(grad_f_x, jvp),
            residual_norm: norm(&sub(av, b)),
        }
    }
}

fn check_dims<P: BilevelOracles + ?Sized>(p: &P, x: &[f64], y: &[f64]) {
    assert_eq!(x.len(), p.dim_x(), "dimension mismatch in x");
    assert_eq!(y.len(), p.dim_y(), "dimension mismatch in y");
}

/// Evaluates the estimator at `(x, y, v)`. Pass `precomputed_av = Some(A v)`
/// when the caller already holds the Hessian-vector product; otherwise one
/// HVP is spent.
///
/// # Panics
/// On dimension mismatch: that is a programming error, not a runtime state.
pub fn hypergrad_estimate<P: BilevelOracles + ?Sized>(
    p: &P,
    x: &[f64],
    y: &[f64],
    v: &[f64],
    precomputed_av: Option<&[f64]>,
) -> HyperGradEstimate {
    check_dims(p, x, y);
    assert_eq!(v.len(), p.dim_y(), "dimension mismatch in v");
    let gx = p.grad_f_x(x, y);
    let jv = p.jvp_gxy(x, y, v);
    let b = p.grad_f_y(x, y);
    match precomputed_av {
        Some(av) => HyperGradEstimate::from_parts(&gx, &jv, av, &b),
        None => HyperGradEstimate::from_parts(&gx, &jv, &p.hvp_gyy(x, y, v), &b),
    }
}

/// `y − θ ∇_y g(x, y)`
pub fn lower_gd_step<P: BilevelOracles + ?Sized>(
    p: &P,
    x: &[f64],
    y: &[f64],
    theta: f64,
) -> Vec<f64> {
    let mut out = y.to_vec();
    axpy(-theta, &p.grad_g_y(x, y), &mut out);
    out
}

/// Reference hyper-gradient from an exact lower-level solve.
#[derive(Debug, Clone)]
pub struct ExactHypergrad {
    pub grad: Vec<f64>,
    pub y_star: Vec<f64>,
    pub v_star: Vec<f64>,
}

/// Damped Newton on the lower level to `‖∇_y g‖ ≤ inner_tol`, then a dense
/// Cholesky solve for `v* = [∇²_yy g]⁻¹ ∇_y f`. Forms dense Hessians, so it
/// is meant for tests and small problems only.
pub fn exact_hypergrad<P: BilevelOracles + ?Sized>(
    p: &P,
    x: &[f64],
    y_start: &[f64],
    inner_tol: f64,
) -> Result<ExactHypergrad, BilevelError> {
    check_dims(p, x, y_start);
    let dy = p.dim_y();
    let hessian = |y: &[f64]| {
        let mut h = DenseMatrix::from_columns_of(dy, dy, |e| p.hvp_gyy(x, y, e));
        h.symmetrize();
        h
    };
    const MAX_NEWTON: usize = 100;
    let mut y = y_start.to_vec();
    let mut gy = p.grad_g_y(x, &y);
    let mut iters = 0;
    while norm(&gy) > inner_tol {
        if iters == MAX_NEWTON {
            return Err(BilevelError::NoConvergence {
                iters,
                grad_norm: norm(&gy),
            });
        }
        iters += 1;
        let step = dense_solve(&hessian(&y), &gy)?;
        let (g0, n0) = (p.g_value(x, &y), norm(&gy));
        let mut t = 1.0;
        let accepted = loop {
            let mut trial = y.clone();
            axpy(-t, &step, &mut trial);
            let g_trial = p.grad_g_y(x, &trial);
            if p.g_value(x, &trial) < g0 || norm(&g_trial) < n0 {
                y = trial;
                gy = g_trial;
                break true;
            }
            t *= 0.5;
            if t < 1e-12 {
                break false;
            }
        };
        if !accepted {
            return Err(BilevelError::NoConvergence {
                iters,
                grad_norm: n0,
            });
        }
    }
    let v_star = dense_solve(&hessian(&y), &p.grad_f_y(x, &y))?;
    let grad = sub(&p.grad_f_x(x, &y), &p.jvp_gxy(x, &y, &v_star));
    Ok(ExactHypergrad {
        grad,
        y_star: y,
        v_star,
    })
}
