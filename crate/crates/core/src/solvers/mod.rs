//! Outer-loop bilevel solvers sharing one run contract.
//!
//! Every solver performs, per outer iteration `k`,
//!
//! 1. `b_k = ∇_y f(x_k, y_k)`,
//! 2. a solver-specific update of the estimate `v_k ≈ [∇²_yy g]⁻¹ b_k`,
//! 3. `x_{k+1} = x_k − λ_k (∇_x f − ∇²_xy g · v_k)`,
//! 4. `y_{k+1} = y_k − θ_k ∇_y g(x_{k+1}, y_k)`.
//!
//! Oracle calls made by the algorithm are counted. The per-iteration
//! diagnostics written to the trace (residual, hyper-gradient norm, values)
//! are evaluated on the uncounted problem so that they never perturb the
//! reported budget.

mod baselines;
mod lancbio;
mod subbio;

pub use baselines::{baseline_run, BaselineKind};
pub use lancbio::{lancbio_minres_run, lancbio_run};
pub use subbio::subbio_run;

use alloc::vec::Vec;
use core::fmt;
use core::ops::ControlFlow;
use core::str::FromStr;
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::bilevel::{BilevelOracles, Counted, EvalCounters, HyperGradEstimate};
use crate::numeric::vector::{axpy, norm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid solver configuration: {field} {reason}")]
    Invalid {
        field: &'static str,
        reason: &'static str,
    },
    #[error("unknown solver id `{0}`")]
    UnknownSolver(alloc::string::String),
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// How the effective subspace dimension evolves over epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DimRamp {
    /// Always use `m`.
    Off,
    /// `1, 2, …, m` over the first `m` epochs, then `m`.
    #[default]
    Linear,
}

impl DimRamp {
    pub fn effective(self, epoch: usize, m: usize) -> usize {
        match self {
            DimRamp::Off => m,
            DimRamp::Linear => (epoch + 1).min(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Outer step `λ`. Zero freezes `x`.
    pub lambda: f64,
    /// Lower-level step `θ`.
    pub theta: f64,
    /// Step `η` of the SubBiO subspace, SOBA, AmIGO-GD and Neumann baselines.
    pub eta: f64,
    /// Subspace dimension (epoch length) for the Lanczos solvers.
    pub m: usize,
    /// Steps at the start of each epoch during which `λ` is forced to zero.
    pub m0: usize,
    /// Outer iteration budget `K`.
    pub iters: usize,
    /// Inner iterations `I` for the AmIGO baselines.
    pub inner_iters: usize,
    /// Neumann terms `N`.
    pub neumann_terms: usize,
    pub ramp: DimRamp,
    /// `λ_k = λ / k^p` when set.
    pub lambda_decay: Option<f64>,
    pub ttsa_lambda_exp: f64,
    pub ttsa_theta_exp: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            theta: 0.1,
            eta: 0.1,
            m: 10,
            m0: 0,
            iters: 100,
            inner_iters: 5,
            neumann_terms: 5,
            ramp: DimRamp::Linear,
            lambda_decay: None,
            ttsa_lambda_exp: 0.6,
            ttsa_theta_exp: 0.4,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, reason| Err(ConfigError::Invalid { field, reason });
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad("lambda", "must be finite and nonnegative");
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return bad("theta", "must be finite and positive");
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad("eta", "must be finite and positive");
        }
        if self.m == 0 {
            return bad("m", "must be at least 1");
        }
        if self.m0 >= self.m {
            return bad("m0", "must be smaller than m");
        }
        if self.iters == 0 {
            return bad("iters", "must be at least 1");
        }
        if self.inner_iters == 0 {
            return bad("inner_iters", "must be at least 1");
        }
        if self.neumann_terms == 0 {
            return bad("neumann_terms", "must be at least 1");
        }
        if let Some(p) = self.lambda_decay {
            if !(p >= 0.0) {
                return bad("lambda_decay", "must be nonnegative");
            }
        }
        Ok(())
    }
}

/// Every solver behind one id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    LancBio,
    LancBioMinres,
    SubBio,
    Baseline(BaselineKind),
}

impl SolverKind {
    pub const ALL: [SolverKind; 8] = [
        SolverKind::LancBio,
        SolverKind::LancBioMinres,
        SolverKind::SubBio,
        SolverKind::Baseline(BaselineKind::AmigoGd),
        SolverKind::Baseline(BaselineKind::AmigoCg),
        SolverKind::Baseline(BaselineKind::Soba),
        SolverKind::Baseline(BaselineKind::StocBioNeumann),
        SolverKind::Baseline(BaselineKind::Ttsa),
    ];

    pub fn id(self) -> &'static str {
        match self {
            SolverKind::LancBio => "lancbio",
            SolverKind::LancBioMinres => "lancbio-minres",
            SolverKind::SubBio => "subbio",
            SolverKind::Baseline(BaselineKind::AmigoGd) => "amigo-gd",
            SolverKind::Baseline(BaselineKind::AmigoCg) => "amigo-cg",
            SolverKind::Baseline(BaselineKind::Soba) => "soba",
            SolverKind::Baseline(BaselineKind::StocBioNeumann) => "stocbio",
            SolverKind::Baseline(BaselineKind::Ttsa) => "ttsa",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SolverKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| ConfigError::UnknownSolver(s.into()))
    }
}

/// Metrics for one outer iteration, evaluated at `(x_k, y_k, v_k)`.
/// Counters are cumulative after the iteration's oracle calls.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// Left at zero by the solvers; filled in by a timing observer.
    pub wall_time_s: f64,
    pub hypergrad_norm: f64,
    pub residual_norm: f64,
    pub upper_value: f64,
    pub lower_grad_norm: f64,
    pub test_metric: Option<f64>,
    pub n_hvp: u64,
    pub n_jvp: u64,
    pub n_grad: u64,
    /// The `v` update hit a breakdown and the next iteration restarts.
    pub breakdown: bool,
}

/// Read-only view handed to observers after each outer iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterView<'a> {
    pub k: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub v: &'a [f64],
    pub v_prev: &'a [f64],
}

/// Per-iteration hook. It may annotate the record (timing, test metrics)
/// and stop the run early.
pub trait Observer {
    fn observe(&mut self, view: &IterView<'_>, record: &mut TraceRecord) -> ControlFlow<()>;
}

impl Observer for () {
    fn observe(&mut self, _: &IterView<'_>, _: &mut TraceRecord) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }
}

impl<F> Observer for F
where
    F: FnMut(&IterView<'_>, &mut TraceRecord) -> ControlFlow<()>,
{
    fn observe(&mut self, view: &IterView<'_>, record: &mut TraceRecord) -> ControlFlow<()> {
        self(view, record)
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x_final: Vec<f64>,
    pub y_final: Vec<f64>,
    pub v_final: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub counters: EvalCounters,
    pub breakdowns: usize,
    pub stopped_early: bool,
}

/// Output of one `v` update.
pub(crate) struct VStep {
    pub v: Vec<f64>,
    /// Force `λ_k = 0` for this iteration.
    pub freeze_x: bool,
    pub breakdown: bool,
}

pub(crate) trait VUpdate {
    fn next_v<P: BilevelOracles>(
        &mut self,
        p: &P,
        x: &[f64],
        y: &[f64],
        b: &[f64],
        v_prev: &[f64],
    ) -> VStep;
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Schedule {
    lambda: f64,
    theta: f64,
    lambda_exp: Option<f64>,
    theta_exp: Option<f64>,
}

impl Schedule {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        Self {
            lambda: cfg.lambda,
            theta: cfg.theta,
            lambda_exp: cfg.lambda_decay,
            theta_exp: None,
        }
    }

    pub fn two_timescale(cfg: &SolverConfig) -> Self {
        Self {
            lambda: cfg.lambda,
            theta: cfg.theta,
            lambda_exp: Some(cfg.ttsa_lambda_exp),
            theta_exp: Some(cfg.ttsa_theta_exp),
        }
    }

    fn at(base: f64, exp: Option<f64>, k: usize) -> f64 {
        match exp {
            Some(p) => base / (k as f64).powf(p),
            None => base,
        }
    }

    fn lambda(&self, k: usize) -> f64 {
        Self::at(self.lambda, self.lambda_exp, k)
    }

    fn theta(&self, k: usize) -> f64 {
        Self::at(self.theta, self.theta_exp, k)
    }
}

pub(crate) fn check_start<P: BilevelOracles + ?Sized>(
    p: &P,
    cfg: &SolverConfig,
    x0: &[f64],
    y0: &[f64],
    v0: &[f64],
) -> Result<(), ConfigError> {
    cfg.validate()?;
    let dims = [
        ("x0", p.dim_x(), x0.len()),
        ("y0", p.dim_y(), y0.len()),
        ("v0", p.dim_y(), v0.len()),
    ];
    for (what, expected, got) in dims {
        if expected != got {
            return Err(ConfigError::DimensionMismatch {
                what,
                expected,
                got,
            });
        }
    }
    Ok(())
}

/// Shared outer loop.
pub(crate) fn drive<P, U, O>(
    p: &P,
    cfg: &SolverConfig,
    schedule: Schedule,
    start: (&[f64], &[f64], &[f64]),
    update: &mut U,
    observer: &mut O,
) -> RunResult
where
    P: BilevelOracles + ?Sized,
    U: VUpdate,
    O: Observer + ?Sized,
{
    let counted = Counted::new(p);
    let (mut x, mut y, mut v) = (start.0.to_vec(), start.1.to_vec(), start.2.to_vec());
    let mut trace = Vec::with_capacity(cfg.iters);
    let mut breakdowns = 0;
    let mut stopped_early = false;

    for k in 1..=cfg.iters {
        let b = counted.grad_f_y(&x, &y);
        let step = update.next_v(&counted, &x, &y, &b, &v);
        breakdowns += usize::from(step.breakdown);

        let gx = counted.grad_f_x(&x, &y);
        let jv = counted.jvp_gxy(&x, &y, &step.v);
        let lambda = if step.freeze_x {
            0.0
        } else {
            schedule.lambda(k)
        };
        let mut x_next = x.clone();
        axpy(-lambda, &gx, &mut x_next);
        axpy(lambda, &jv, &mut x_next);
        let mut y_next = y.clone();
        axpy(
            -schedule.theta(k),
            &counted.grad_g_y(&x_next, &y),
            &mut y_next,
        );

        let diag = HyperGradEstimate::from_parts(&gx, &jv, &p.hvp_gyy(&x, &y, &step.v), &b);
        let c = counted.counters();
        let mut record = TraceRecord {
            iter: k,
            wall_time_s: 0.0,
            hypergrad_norm: norm(&diag.grad),
            residual_norm: diag.residual_norm,
            upper_value: p.f_value(&x, &y),
            lower_grad_norm: norm(&p.grad_g_y(&x, &y)),
            test_metric: None,
            n_hvp: c.n_hvp,
            n_jvp: c.n_jvp,
            n_grad: c.n_grad(),
            breakdown: step.breakdown,
        };
        let view = IterView {
            k,
            x: &x,
            y: &y,
            v: &step.v,
            v_prev: &v,
        };
        let flow = observer.observe(&view, &mut record);
        trace.push(record);

        x = x_next;
        y = y_next;
        v = step.v;
        if flow.is_break() {
            stopped_early = k < cfg.iters;
            break;
        }
    }

    RunResult {
        x_final: x,
        y_final: y,
        v_final: v,
        trace,
        counters: counted.counters(),
        breakdowns,
        stopped_early,
    }
}

/// Runs any solver by kind.
pub fn run<P, O>(
    kind: SolverKind,
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
    match kind {
        SolverKind::LancBio => lancbio_run(p, cfg, x0, y0, v0, observer),
        SolverKind::LancBioMinres => lancbio_minres_run(p, cfg, x0, y0, v0, observer),
        SolverKind::SubBio => subbio_run(p, cfg, x0, y0, v0, observer),
        SolverKind::Baseline(b) => baseline_run(b, p, cfg, x0, y0, v0, observer),
    }
}
