//! Reference hyper-gradient solvers: inner GD/CG, single-step, and
//! truncated Neumann series.

use alloc::vec::Vec;
use core::fmt;

use super::{
    check_start, drive, ConfigError, Observer, RunResult, Schedule, SolverConfig, VStep, VUpdate,
};
use crate::bilevel::BilevelOracles;
use crate::krylov::cg_solve;
use crate::numeric::vector::{axpy, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineKind {
    /// `I` gradient steps on the quadratic, warm-started.
    AmigoGd,
    /// `I` conjugate-gradient steps, warm-started.
    AmigoCg,
    /// One gradient step per outer iteration.
    Soba,
    /// `η Σ_{i<N} (I − ηA)^i b`, cold-started.
    StocBioNeumann,
    /// Neumann estimate with decaying two-timescale steps.
    Ttsa,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&super::SolverKind::Baseline(*self), f)
    }
}

struct BaselineUpdate {
    kind: BaselineKind,
    eta: f64,
    inner: usize,
    terms: usize,
}

fn gd_step<F: Fn(&[f64]) -> Vec<f64>>(op: &F, b: &[f64], v: &mut [f64], eta: f64) {
    let residual = sub(&op(v), b);
    axpy(-eta, &residual, v);
}

fn neumann<F: Fn(&[f64]) -> Vec<f64>>(op: &F, b: &[f64], eta: f64, terms: usize) -> Vec<f64> {
    let mut term = b.to_vec();
    let mut sum = b.to_vec();
    for _ in 1..terms {
        let at = op(&term);
        axpy(-eta, &at, &mut term);
        axpy(1.0, &term, &mut sum);
    }
    sum.iter_mut().for_each(|s| *s *= eta);
    sum
}

impl VUpdate for BaselineUpdate {
    fn next_v<P: BilevelOracles>(
        &mut self,
        p: &P,
        x: &[f64],
        y: &[f64],
        b: &[f64],
        v_prev: &[f64],
    ) -> VStep {
        let op = |u: &[f64]| p.hvp_gyy(x, y, u);
        let v = match self.kind {
            BaselineKind::AmigoGd => {
                let mut v = v_prev.to_vec();
                for _ in 0..self.inner {
                    gd_step(&op, b, &mut v, self.eta);
                }
                v
            }
            BaselineKind::AmigoCg => cg_solve(&op, b, v_prev, self.inner),
            BaselineKind::Soba => {
                let mut v = v_prev.to_vec();
                gd_step(&op, b, &mut v, self.eta);
                v
            }
            BaselineKind::StocBioNeumann | BaselineKind::Ttsa => {
                neumann(&op, b, self.eta, self.terms)
            }
        };
        VStep {
            v,
            freeze_x: false,
            breakdown: false,
        }
    }
}

pub fn baseline_run<P, O>(
    kind: BaselineKind,
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
    let schedule = match kind {
        BaselineKind::Ttsa => Schedule::two_timescale(cfg),
        _ => Schedule::from_config(cfg),
    };
    let mut update = BaselineUpdate {
        kind,
        eta: cfg.eta,
        inner: cfg.inner_iters,
        terms: cfg.neumann_terms,
    };
    Ok(drive(p, cfg, schedule, (x0, y0, v0), &mut update, observer))
}
