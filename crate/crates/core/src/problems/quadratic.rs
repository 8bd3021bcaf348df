use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_len, ProblemError};
use crate::bilevel::BilevelOracles;
use crate::numeric::vector::{dot, scaled, sub};
use crate::numeric::{spd_with_spectrum, DenseMatrix};

/// Quadratic bilevel test problem with closed-form solution maps:
///
/// ```text
/// f(x, y) = ½‖x − a‖² + ½ρ‖y − t‖² + cᵀy
/// g(x, y) = ½ yᵀH y − yᵀB x
/// ```
///
/// `∇²_yy g = H` is constant. With `ρ = 0` the right-hand side `∇_y f = c`
/// is constant too, which freezes the linear system seen by the solvers.
#[derive(Debug, Clone)]
pub struct QuadraticBilevel {
    h: DenseMatrix,
    cross: DenseMatrix,
    a: Vec<f64>,
    target: Vec<f64>,
    c: Vec<f64>,
    rho: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSpec {
    pub dim_x: usize,
    pub dim_y: usize,
    /// Condition number of `H`; eigenvalues are spaced linearly on `[1, cond]`.
    pub cond: f64,
    pub rho: f64,
    pub seed: u64,
}

impl QuadraticBilevel {
    pub fn new(
        h: DenseMatrix,
        cross: DenseMatrix,
        a: Vec<f64>,
        target: Vec<f64>,
        c: Vec<f64>,
        rho: f64,
    ) -> Result<Self, ProblemError> {
        let dy = h.rows();
        check_len("H columns", dy, h.cols())?;
        check_len("B rows", dy, cross.rows())?;
        check_len("a", cross.cols(), a.len())?;
        check_len("target", dy, target.len())?;
        check_len("c", dy, c.len())?;
        Ok(Self {
            h,
            cross,
            a,
            target,
            c,
            rho,
        })
    }

    pub fn random(spec: &QuadraticSpec) -> Result<Self, ProblemError> {
        if spec.dim_x == 0 || spec.dim_y == 0 {
            return Err(ProblemError::InvalidSpec(
                "quadratic dimensions must be positive",
            ));
        }
        if !(spec.cond >= 1.0) {
            return Err(ProblemError::InvalidSpec(
                "condition number must be at least 1",
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let n = spec.dim_y;
        let eigs: Vec<f64> = (0..n)
            .map(|i| {
                if n == 1 {
                    1.0
                } else {
                    1.0 + (spec.cond - 1.0) * i as f64 / (n - 1) as f64
                }
            })
            .collect();
        let h = spd_with_spectrum(&eigs, &mut rng);
        let scale = 1.0 / (spec.dim_x as f64).sqrt();
        let cross_data = (0..n * spec.dim_x)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cross = DenseMatrix::from_row_major(n, spec.dim_x, cross_data);
        let mut gauss =
            |len: usize| -> Vec<f64> { (0..len).map(|_| rng.sample(StandardNormal)).collect() };
        let a = gauss(spec.dim_x);
        let target = gauss(n);
        let c = gauss(n);
        Self::new(h, cross, a, target, c, spec.rho)
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.h
    }

    /// `B` in `g = ½ yᵀHy − yᵀBx`.
    pub fn cross(&self) -> &DenseMatrix {
        &self.cross
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl BilevelOracles for QuadraticBilevel {
    fn dim_x(&self) -> usize {
        self.cross.cols()
    }
    fn dim_y(&self) -> usize {
        self.h.rows()
    }
    fn f_value(&self, x: &[f64], y: &[f64]) -> f64 {
        let dx = sub(x, &self.a);
        let dy = sub(y, &self.target);
        0.5 * dot(&dx, &dx) + 0.5 * self.rho * dot(&dy, &dy) + dot(&self.c, y)
    }
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        0.5 * dot(y, &self.h.matvec(y)) - dot(y, &self.cross.matvec(x))
    }
    fn grad_f_x(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        sub(x, &self.a)
    }
    fn grad_f_y(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = scaled(self.rho, &sub(y, &self.target));
        g.iter_mut().zip(&self.c).for_each(|(gi, ci)| *gi += ci);
        g
    }
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        sub(&self.h.matvec(y), &self.cross.matvec(x))
    }
    fn hvp_gyy(&self, _x: &[f64], _y: &[f64], v: &[f64]) -> Vec<f64> {
        self.h.matvec(v)
    }
    fn jvp_gxy(&self, _x: &[f64], _y: &[f64], v: &[f64]) -> Vec<f64> {
        scaled(-1.0, &self.cross.matvec_t(v))
    }
}
