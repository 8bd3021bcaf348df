//! Named problem families and small instances used for oracle checks.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{
    corrupt_labels, gen_classification_data, make_hyperclean, make_logreg, make_nonconvex_sin,
    make_synthetic, Dataset, HyperClean, HyperCleanSpec, LogReg, LogRegSpec, NonconvexSin,
    NonconvexSinSpec, ProblemError, QuadraticBilevel, QuadraticSpec, Synthetic, SyntheticSpec,
};
use crate::bilevel::BilevelOracles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    Quadratic,
    Synthetic,
    NonconvexSin,
    HyperClean,
    LogReg,
}

impl ProblemId {
    pub const ALL: [ProblemId; 5] = [
        ProblemId::Quadratic,
        ProblemId::Synthetic,
        ProblemId::NonconvexSin,
        ProblemId::HyperClean,
        ProblemId::LogReg,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ProblemId::Quadratic => "quadratic",
            ProblemId::Synthetic => "synthetic",
            ProblemId::NonconvexSin => "sine",
            ProblemId::HyperClean => "hyperclean",
            ProblemId::LogReg => "logreg",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownProblem(pub alloc::string::String);

impl fmt::Display for UnknownProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown problem id `{}`", self.0)
    }
}

impl core::error::Error for UnknownProblem {}

impl FromStr for ProblemId {
    type Err = UnknownProblem;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.id() == s)
            .ok_or_else(|| UnknownProblem(s.into()))
    }
}

/// Any registered problem behind one type.
#[derive(Debug, Clone)]
pub enum AnyProblem {
    Quadratic(QuadraticBilevel),
    Synthetic(Synthetic),
    NonconvexSin(NonconvexSin),
    HyperClean(HyperClean),
    LogReg(LogReg),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            AnyProblem::Quadratic($p) => $e,
            AnyProblem::Synthetic($p) => $e,
            AnyProblem::NonconvexSin($p) => $e,
            AnyProblem::HyperClean($p) => $e,
            AnyProblem::LogReg($p) => $e,
        }
    };
}

impl BilevelOracles for AnyProblem {
    fn dim_x(&self) -> usize {
        dispatch!(self, p => p.dim_x())
    }
    fn dim_y(&self) -> usize {
        dispatch!(self, p => p.dim_y())
    }
    fn f_value(&self, x: &[f64], y: &[f64]) -> f64 {
        dispatch!(self, p => p.f_value(x, y))
    }
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        dispatch!(self, p => p.g_value(x, y))
    }
    fn grad_f_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        dispatch!(self, p => p.grad_f_x(x, y))
    }
    fn grad_f_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        dispatch!(self, p => p.grad_f_y(x, y))
    }
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        dispatch!(self, p => p.grad_g_y(x, y))
    }
    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        dispatch!(self, p => p.hvp_gyy(x, y, v))
    }
    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        dispatch!(self, p => p.jvp_gxy(x, y, v))
    }
}

impl AnyProblem {
    pub fn id(&self) -> ProblemId {
        match self {
            AnyProblem::Quadratic(_) => ProblemId::Quadratic,
            AnyProblem::Synthetic(_) => ProblemId::Synthetic,
            AnyProblem::NonconvexSin(_) => ProblemId::NonconvexSin,
            AnyProblem::HyperClean(_) => ProblemId::HyperClean,
            AnyProblem::LogReg(_) => ProblemId::LogReg,
        }
    }

    /// Default starting point `(x₀, y₀)`.
    pub fn initial_point(&self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        match self {
            AnyProblem::Quadratic(p) => (alloc::vec![0.0; p.dim_x()], alloc::vec![0.0; p.dim_y()]),
            AnyProblem::Synthetic(p) => p.initial_point(seed),
            AnyProblem::NonconvexSin(p) => p.initial_point(seed),
            AnyProblem::HyperClean(p) => p.initial_point(),
            AnyProblem::LogReg(p) => p.initial_point(),
        }
    }

    /// Classification accuracy of the lower variable on `data`, for the
    /// problems that train a classifier.
    pub fn accuracy(&self, y: &[f64], data: &Dataset) -> Option<f64> {
        match self {
            AnyProblem::HyperClean(p) => Some(p.accuracy(y, data)),
            AnyProblem::LogReg(p) => Some(p.accuracy(y, data)),
            _ => None,
        }
    }

    /// Scale of the Gaussian perturbations used when sampling check points.
    pub fn check_scale(&self) -> f64 {
        match self {
            AnyProblem::NonconvexSin(_) => core::f64::consts::PI,
            _ => 1.0,
        }
    }
}

/// Generated classification splits: corrupted training rows, clean
/// validation and test rows.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub dim: usize,
    pub classes: usize,
    pub separation: f64,
    /// Probability of replacing a training label with a wrong one.
    pub corruption: f64,
}

pub fn generated_splits(spec: &SplitSpec, seed: u64) -> Splits {
    let n = spec.train + spec.val + spec.test;
    let all = gen_classification_data(n, spec.dim, spec.classes, spec.separation, seed);
    let train = all.slice(0, spec.train);
    let labels = corrupt_labels(
        train.labels(),
        spec.classes,
        spec.corruption,
        seed ^ 0xc0_77_u64,
    );
    Splits {
        train: train.with_labels(labels).expect("same length"),
        val: all.slice(spec.train, spec.val),
        test: all.slice(spec.train + spec.val, spec.test),
    }
}

/// Small, fast instance of each family for finite-difference checks.
pub fn oracle_instance(id: ProblemId, seed: u64) -> Result<AnyProblem, ProblemError> {
    Ok(match id {
        ProblemId::Quadratic => AnyProblem::Quadratic(QuadraticBilevel::random(&QuadraticSpec {
            dim_x: 5,
            dim_y: 10,
            cond: 100.0,
            rho: 1.0,
            seed,
        })?),
        ProblemId::Synthetic => {
            AnyProblem::Synthetic(make_synthetic(SyntheticSpec::random(20, seed))?)
        }
        ProblemId::NonconvexSin => {
            AnyProblem::NonconvexSin(make_nonconvex_sin(NonconvexSinSpec::random(100, seed))?)
        }
        ProblemId::HyperClean => {
            let s = generated_splits(
                &SplitSpec {
                    train: 40,
                    val: 40,
                    test: 0,
                    dim: 5,
                    classes: 3,
                    separation: 2.0,
                    corruption: 0.5,
                },
                seed,
            );
            AnyProblem::HyperClean(make_hyperclean(HyperCleanSpec {
                train: s.train,
                val: s.val,
                classes: 3,
                c_r: HyperCleanSpec::DEFAULT_C_R,
            })?)
        }
        ProblemId::LogReg => {
            let s = generated_splits(
                &SplitSpec {
                    train: 100,
                    val: 100,
                    test: 0,
                    dim: 20,
                    classes: 3,
                    separation: 2.0,
                    corruption: 0.0,
                },
                seed,
            );
            AnyProblem::LogReg(make_logreg(LogRegSpec {
                train: s.train,
                val: s.val,
                classes: 3,
            })?)
        }
    })
}
