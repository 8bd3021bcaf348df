//! Finite-difference consistency checks for [`BilevelOracles`]
//! implementations.

use alloc::vec::Vec;
use core::fmt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bilevel::BilevelOracles;
use crate::numeric::vector::{dist, dot, norm};
use crate::numeric::{finite_diff_gradient, DEFAULT_FD_STEP};

/// Tolerance for first-order oracles against differences of values.
pub const GRAD_TOL: f64 = 1e-5;
/// Tolerance for second-order oracles against differences of gradients.
pub const SECOND_ORDER_TOL: f64 = 1e-4;
/// Norms below this are compared absolutely rather than relatively.
const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    GradFx,
    GradFy,
    GradGy,
    HvpGyy,
    JvpGxy,
}

impl OracleKind {
    pub const ALL: [OracleKind; 5] = [
        OracleKind::GradFx,
        OracleKind::GradFy,
        OracleKind::GradGy,
        OracleKind::HvpGyy,
        OracleKind::JvpGxy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleKind::GradFx => "grad_f_x",
            OracleKind::GradFy => "grad_f_y",
            OracleKind::GradGy => "grad_g_y",
            OracleKind::HvpGyy => "hvp_gyy",
            OracleKind::JvpGxy => "jvp_gxy",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            OracleKind::GradFx | OracleKind::GradFy | OracleKind::GradGy => GRAD_TOL,
            OracleKind::HvpGyy | OracleKind::JvpGxy => SECOND_ORDER_TOL,
        }
    }
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub kind: OracleKind,
    pub worst_rel_err: f64,
    /// Index of the point where the worst error occurred.
    pub worst_point: usize,
    pub points: usize,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.worst_rel_err <= self.kind.tolerance()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub checks: Vec<OracleCheck>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(OracleCheck::passed)
    }

    pub fn get(&self, kind: OracleKind) -> Option<&OracleCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }
}

/// `‖a − b‖ / max(‖a‖, ‖b‖, floor)`
pub fn rel_err(analytic: &[f64], approx: &[f64]) -> f64 {
    dist(analytic, approx) / norm(analytic).max(norm(approx)).max(SCALE_FLOOR)
}

fn normal_vec(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

/// Gaussian perturbations `(x0 + σ ξ, y0 + σ ζ)` of a base point.
pub fn random_points(
    x0: &[f64],
    y0: &[f64],
    n: usize,
    scale: f64,
    seed: u64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let dx = normal_vec(x0.len(), scale, &mut rng);
            let dy = normal_vec(y0.len(), scale, &mut rng);
            let x = x0.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let y = y0.iter().zip(&dy).map(|(a, b)| a + b).collect();
            (x, y)
        })
        .collect()
}

/// Error of one oracle at one point, with a random unit-variance
/// direction for the second-order oracles.
pub fn oracle_error<P: BilevelOracles + ?Sized>(
    p: &P,
    kind: OracleKind,
    x: &[f64],
    y: &[f64],
    dir: &[f64],
) -> f64 {
    let h = DEFAULT_FD_STEP;
    match kind {
        OracleKind::GradFx => rel_err(
            &p.grad_f_x(x, y),
            &finite_diff_gradient(|x| p.f_value(x, y), x, h),
        ),
        OracleKind::GradFy => rel_err(
            &p.grad_f_y(x, y),
            &finite_diff_gradient(|y| p.f_value(x, y), y, h),
        ),
        OracleKind::GradGy => rel_err(
            &p.grad_g_y(x, y),
            &finite_diff_gradient(|y| p.g_value(x, y), y, h),
        ),
        OracleKind::HvpGyy => {
            let shifted = |s: f64| {
                let ys: Vec<f64> = y.iter().zip(dir).map(|(a, d)| a + s * d).collect();
                p.grad_g_y(x, &ys)
            };
            let (gp, gm) = (shifted(h), shifted(-h));
            let fd: Vec<f64> = gp
                .iter()
                .zip(&gm)
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect();
            rel_err(&p.hvp_gyy(x, y, dir), &fd)
        }
        OracleKind::JvpGxy => {
            let fd = finite_diff_gradient(|x| dot(&p.grad_g_y(x, y), dir), x, h);
            rel_err(&p.jvp_gxy(x, y, dir), &fd)
        }
    }
}

/// Runs every oracle check at each point and keeps the worst error.
pub fn check_oracles<P: BilevelOracles + ?Sized>(
    p: &P,
    points: &[(Vec<f64>, Vec<f64>)],
    seed: u64,
) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks: Vec<OracleCheck> = OracleKind::ALL
        .iter()
        .map(|&kind| OracleCheck {
            kind,
            worst_rel_err: 0.0,
            worst_point: 0,
            points: points.len(),
        })
        .collect();
    for (i, (x, y)) in points.iter().enumerate() {
        let dir = normal_vec(p.dim_y(), 1.0, &mut rng);
        for check in checks.iter_mut() {
            let err = oracle_error(p, check.kind, x, y, &dir);
            // NaN must register as a failure
            if !(err <= check.worst_rel_err) {
                check.worst_rel_err = err;
                check.worst_point = i;
            }
        }
    }
    OracleReport { checks }
}
