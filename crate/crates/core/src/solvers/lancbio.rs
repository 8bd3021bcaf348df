//! Dynamic-Lanczos hyper-gradient solver and its minimal-residual variant.

use alloc::vec;
use alloc::vec::Vec;

use super::{
    check_start, drive, ConfigError, DimRamp, Observer, RunResult, Schedule, SolverConfig, VStep,
    VUpdate,
};
use crate::bilevel::BilevelOracles;
use crate::krylov::{minres_correction, KrylovError, LanczosState};
use crate::numeric::vector::{add, norm, sub};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Correction {
    /// `Δv = Q T⁻¹ Qᵀ r`
    Galerkin,
    /// `Δv = Q argmin ‖‖r‖ e₁ − [T; β e_jᵀ] c‖`
    MinimalResidual,
}

struct Epoch {
    v_bar: Vec<f64>,
    /// `A v̄` at the restart point.
    w: Vec<f64>,
    /// `None` when the restart residual was exactly zero.
    lanczos: Option<LanczosState>,
    steps: usize,
    m_eff: usize,
    dv: Vec<f64>,
}

struct LancUpdate {
    correction: Correction,
    m: usize,
    m0: usize,
    ramp: DimRamp,
    epochs_started: usize,
    epoch: Option<Epoch>,
    force_restart: bool,
}

impl LancUpdate {
    fn new(cfg: &SolverConfig, correction: Correction) -> Self {
        Self {
            correction,
            m: cfg.m,
            m0: cfg.m0,
            ramp: cfg.ramp,
            epochs_started: 0,
            epoch: None,
            force_restart: false,
        }
    }

    fn needs_restart(&self) -> bool {
        self.force_restart || self.epoch.as_ref().is_none_or(|e| e.steps >= e.m_eff)
    }
}

impl VUpdate for LancUpdate {
    fn next_v<P: BilevelOracles>(
        &mut self,
        p: &P,
        x: &[f64],
        y: &[f64],
        b: &[f64],
        v_prev: &[f64],
    ) -> VStep {
        let op = |u: &[f64]| p.hvp_gyy(x, y, u);

        if self.needs_restart() {
            let v_bar = v_prev.to_vec();
            let w = op(&v_bar);
            let lanczos = LanczosState::new(&sub(b, &w)).ok();
            let m_eff = self.ramp.effective(self.epochs_started, self.m);
            self.epochs_started += 1;
            self.force_restart = false;
            self.epoch = Some(Epoch {
                dv: vec![0.0; v_bar.len()],
                v_bar,
                w,
                lanczos,
                steps: 0,
                m_eff,
            });
        }
        let epoch = self.epoch.as_mut().expect("epoch initialised above");
        epoch.steps += 1;
        let freeze_x = epoch.steps <= self.m0;

        let mut breakdown = false;
        match epoch.lanczos.as_mut() {
            None => breakdown = true,
            Some(lanczos) => {
                // r uses the current b against the frozen A v̄
                let r = sub(b, &epoch.w);
                match lanczos.step(&op) {
                    Ok(()) => {}
                    Err(KrylovError::LuckyBreakdown { .. }) => breakdown = true,
                    Err(_) => unreachable!("epoch restarts before the basis is exhausted"),
                }
                let corr = match self.correction {
                    Correction::Galerkin => lanczos.tridiagonal_correction(&r),
                    Correction::MinimalResidual => minres_correction(lanczos, norm(&r)),
                };
                match corr {
                    Ok(dv) if dv.iter().all(|d| d.is_finite()) => epoch.dv = dv,
                    _ => breakdown = true,
                }
            }
        }
        if breakdown {
            self.force_restart = true;
        }
        VStep {
            v: add(&epoch.v_bar, &epoch.dv),
            freeze_x,
            breakdown,
        }
    }
}

fn run_with<P, O>(
    correction: Correction,
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
    let mut update = LancUpdate::new(cfg, correction);
    Ok(drive(
        p,
        cfg,
        Schedule::from_config(cfg),
        (x0, y0, v0),
        &mut update,
        observer,
    ))
}

/// LancBiO: the hyper-gradient linear system is tracked by a Lanczos basis
/// grown by one vector per outer iteration and restarted every `m` steps.
pub fn lancbio_run<P, O>(
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
    run_with(Correction::Galerkin, p, cfg, x0, y0, v0, observer)
}

/// LancBiO with a minimal-residual correction, safe when the lower-level
/// Hessian is indefinite.
pub fn lancbio_minres_run<P, O>(
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
    run_with(Correction::MinimalResidual, p, cfg, x0, y0, v0, observer)
}
