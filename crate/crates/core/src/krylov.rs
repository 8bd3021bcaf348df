//! Lanczos machinery: the one-step dynamic Lanczos update used inside an
//! outer optimization loop, the classic m-step process, conjugate gradients,
//! and the minimal-residual correction over a Lanczos basis.
//!
//! None of these routines reorthogonalize. Callers that run the dynamic
//! process across a drifting operator are expected to restart the basis
//! periodically.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::numeric::vector::{axpy, dot, norm, scaled};
use crate::numeric::{
    solve_sym_tridiag, tridiag_least_squares, DenseMatrix, LinalgError, SymTridiagonal,
};

/// `‖ω_j‖ ≤ BREAKDOWN_GUARD · ‖u_j‖` means the Krylov space became invariant.
pub const BREAKDOWN_GUARD: f64 = 1e-12;

/// A matrix-free linear map `w ↦ A w`.
pub trait LinearOperator {
    fn apply(&self, x: &[f64]) -> Vec<f64>;
}

impl<F> LinearOperator for F
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self(x)
    }
}

impl LinearOperator for DenseMatrix {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KrylovError {
    /// `β_{j+1}` vanished. `T` has already been extended to `dim` and is the
    /// exact projection onto an invariant subspace.
    #[error("lucky breakdown at dimension {dim}")]
    LuckyBreakdown { dim: usize },
    #[error("Lanczos basis is exhausted; restart required")]
    Exhausted,
    #[error("starting vector is zero")]
    ZeroStart,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Incremental Lanczos state: basis `q_1..q_j`, the `j × j` tridiagonal
/// projection, and the pending `q_{j+1}` with its norm factor `β_{j+1}`.
#[derive(Debug, Clone)]
pub struct LanczosState {
    basis: Vec<Vec<f64>>,
    next: Option<Vec<f64>>,
    t: SymTridiagonal,
    beta_next: f64,
}

impl LanczosState {
    /// Empty state whose first basis vector will be `start / ‖start‖`.
    pub fn new(start: &[f64]) -> Result<Self, KrylovError> {
        let n = norm(start);
        if !(n > 0.0) || !n.is_finite() {
            return Err(KrylovError::ZeroStart);
        }
        Ok(Self {
            basis: Vec::new(),
            next: Some(scaled(1.0 / n, start)),
            t: SymTridiagonal::new(),
            beta_next: 0.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn tridiagonal(&self) -> &SymTridiagonal {
        &self.t
    }

    pub fn beta_next(&self) -> f64 {
        self.beta_next
    }

    /// `q_{j+1}`, absent after a breakdown.
    pub fn next_vector(&self) -> Option<&[f64]> {
        self.next.as_deref()
    }

    pub fn is_exhausted(&self) -> bool {
        self.next.is_none()
    }

    /// One dynamic Lanczos step against the operator supplied for this
    /// iteration. Applies `a` exactly once.
    ///
    /// On `LuckyBreakdown` the basis and `T` have still grown by one; only
    /// the successor vector is missing.
    pub fn step<A: LinearOperator + ?Sized>(&mut self, a: &A) -> Result<(), KrylovError> {
        let q = self.next.take().ok_or(KrylovError::Exhausted)?;
        let mut u = a.apply(&q);
        if let Some(prev) = self.basis.last() {
            axpy(-self.beta_next, prev, &mut u);
        }
        let alpha = dot(&q, &u);
        let mut omega = u;
        axpy(-alpha, &q, &mut omega);
        let u_norm = {
            // ‖u‖² = ‖ω‖² + α² since ω ⟂ q
            let w = norm(&omega);
            (w * w + alpha * alpha).sqrt()
        };
        let beta = norm(&omega);

        self.t.push(alpha, self.beta_next);
        self.basis.push(q);
        self.beta_next = beta;

        if beta <= BREAKDOWN_GUARD * u_norm {
            return Err(KrylovError::LuckyBreakdown { dim: self.dim() });
        }
        omega.iter_mut().for_each(|w| *w /= beta);
        self.next = Some(omega);
        Ok(())
    }

    /// `Qᵀ r`
    pub fn project(&self, r: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|q| dot(q, r)).collect()
    }

    /// `Q c`
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.dim());
        let n = self.basis.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for (q, ci) in self.basis.iter().zip(c) {
            axpy(*ci, q, &mut out);
        }
        out
    }

    /// Galerkin correction `Q T⁻¹ Qᵀ r`.
    pub fn tridiagonal_correction(&self, r: &[f64]) -> Result<Vec<f64>, KrylovError> {
        let z = solve_sym_tridiag(&self.t, &self.project(r))?;
        Ok(self.combine(&z))
    }
}

/// Minimal-residual correction `Q c` with
/// `c = argmin ‖r_norm·e₁ − [T; β e_jᵀ] c‖`. Valid for indefinite `T`.
pub fn minres_correction(state: &LanczosState, r_norm: f64) -> Result<Vec<f64>, KrylovError> {
    let c = tridiag_least_squares(state.tridiagonal(), state.beta_next(), r_norm)?;
    Ok(state.combine(&c))
}

/// Classic `m`-step Lanczos process on a static operator, started from
/// `b / ‖b‖`. Stops early on breakdown, leaving the state exhausted.
pub fn classic_lanczos<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    m: usize,
) -> Result<LanczosState, KrylovError> {
    let b_norm = norm(b);
    if !(b_norm > 0.0) {
        return Err(KrylovError::ZeroStart);
    }
    let mut q = scaled(1.0 / b_norm, b);
    let mut q_prev = vec![0.0; b.len()];
    let mut beta = 0.0;
    let mut basis = Vec::with_capacity(m);
    let mut t = SymTridiagonal::new();
    for _ in 0..m {
        let mut u = a.apply(&q);
        axpy(-beta, &q_prev, &mut u);
        let alpha = dot(&q, &u);
        let mut w = u;
        axpy(-alpha, &q, &mut w);
        let beta_new = norm(&w);
        t.push(alpha, beta);
        let u_norm = (beta_new * beta_new + alpha * alpha).sqrt();
        let broke = beta_new <= BREAKDOWN_GUARD * u_norm;
        basis.push(q.clone());
        beta = beta_new;
        if broke {
            return Ok(LanczosState {
                basis,
                next: None,
                t,
                beta_next: beta,
            });
        }
        q_prev = core::mem::take(&mut q);
        w.iter_mut().for_each(|x| *x /= beta);
        q = w;
    }
    Ok(LanczosState {
        basis,
        next: Some(q),
        t,
        beta_next: beta,
    })
}

/// `iters` steps of two-recurrence conjugate gradients on `A v = b` from the
/// warm start `v0`. Stops early if the residual vanishes.
pub fn cg_solve<A: LinearOperator + ?Sized>(
    a: &A,
    b: &[f64],
    v0: &[f64],
    iters: usize,
) -> Vec<f64> {
    let mut v = v0.to_vec();
    let mut r = b.to_vec();
    axpy(-1.0, &a.apply(&v), &mut r);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..iters {
        if rr == 0.0 {
            break;
        }
        let ap = a.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) || !pap.is_finite() {
            break;
        }
        let step = rr / pap;
        axpy(step, &p, &mut v);
        axpy(-step, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let ratio = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + ratio * *pi;
        }
        rr = rr_new;
    }
    v
}
