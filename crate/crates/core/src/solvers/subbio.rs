//! SubBiO: minimise the hyper-gradient quadratic over a two-dimensional
//! subspace refreshed every outer iteration.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_start, drive, ConfigError, Observer, RunResult, Schedule, SolverConfig, VStep, VUpdate,
};
use crate::bilevel::BilevelOracles;
use crate::numeric::vector::{axpy, dot, norm, scaled};

/// Relative threshold below which the second direction is treated as
/// parallel to the first.
const DEGENERATE_TOL: f64 = 1e-10;

struct SubUpdate {
    eta: f64,
}

impl VUpdate for SubUpdate {
    fn next_v<P: BilevelOracles>(
        &mut self,
        p: &P,
        x: &[f64],
        y: &[f64],
        b: &[f64],
        v_prev: &[f64],
    ) -> VStep {
        let op = |u: &[f64]| p.hvp_gyy(x, y, u);
        let b_norm = norm(b);
        if !(b_norm > 0.0) {
            // the quadratic ½vᵀAv − bᵀv is minimised at 0 on any subspace
            return VStep {
                v: vec![0.0; b.len()],
                freeze_x: false,
                breakdown: true,
            };
        }

        // s₂ = (I − ηA) v_{k−1}
        let mut s2 = v_prev.to_vec();
        axpy(-self.eta, &op(v_prev), &mut s2);
        let s2_norm = norm(&s2);

        let q1 = scaled(1.0 / b_norm, b);
        let mut q2 = s2;
        axpy(-dot(&q1, &q2), &q1, &mut q2);
        let q2_norm = norm(&q2);

        let aq1 = op(&q1);
        let a11 = dot(&q1, &aq1);
        let one_dim = |a11: f64| {
            let c = if a11 > 0.0 { b_norm / a11 } else { 0.0 };
            scaled(c, &q1)
        };

        if q2_norm < DEGENERATE_TOL * b_norm.max(s2_norm) {
            return VStep {
                v: one_dim(a11),
                freeze_x: false,
                breakdown: false,
            };
        }
        q2.iter_mut().for_each(|q| *q /= q2_norm);
        let aq2 = op(&q2);
        let a22 = dot(&q2, &aq2);
        let a12 = 0.5 * (dot(&q1, &aq2) + dot(&q2, &aq1));
        let (r1, r2) = (b_norm, dot(&q2, b));
        let det = a11 * a22 - a12 * a12;
        if !(det > f64::EPSILON * (a11 * a22).abs()) || !(a11 > 0.0) {
            // projected Hessian is not positive definite on the plane
            return VStep {
                v: one_dim(a11),
                freeze_x: false,
                breakdown: true,
            };
        }
        let z1 = (r1 * a22 - r2 * a12) / det;
        let z2 = (a11 * r2 - a12 * r1) / det;
        let mut v: Vec<f64> = scaled(z1, &q1);
        axpy(z2, &q2, &mut v);
        VStep {
            v,
            freeze_x: false,
            breakdown: false,
        }
    }
}

/// SubBiO outer loop. Three Hessian-vector products per iteration.
pub fn subbio_run<P, O>(
    p: &P,
    cfg: &SolverConfig,
    x0: &[f64],
    y0: &[f64],
    v0: &[f64],
    observer: &mut O,
) -> Result<RunResult, ConfigError>
where
    P: BilevelOracles + ?Sized,
    O: Observer + ?Sized,
{
    check_start(p, cfg, x0, y0, v0)?;
    let mut update = SubUpdate { eta: cfg.eta };
    Ok(drive(
        p,
        cfg,
        Schedule::from_config(cfg),
        (x0, y0, v0),
        &mut update,
        observer,
    ))
}
