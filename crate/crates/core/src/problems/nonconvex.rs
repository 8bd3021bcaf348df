use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ProblemError;
use crate::bilevel::BilevelOracles;

/// Scalar upper variable with a separable sine lower level:
///
/// ```text
/// f(x, y) = (x − a)² + ‖y − a·1 − c‖²
/// g(x, y) = Σ sin(x + yᵢ − cᵢ)
/// ```
///
/// `∇²_yy g = diag(−sin(x + yᵢ − cᵢ))` is indefinite away from the local
/// minimizers of each sine.
#[derive(Debug, Clone, PartialEq)]
pub struct NonconvexSinSpec {
    pub a: f64,
    pub c: Vec<f64>,
}

impl NonconvexSinSpec {
    /// `a ~ U[0, 1]`, `cᵢ ~ U[0, 1]`.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.random_range(0.0..1.0);
        let c = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        Self { a, c }
    }
}

#[derive(Debug, Clone)]
pub struct NonconvexSin {
    spec: NonconvexSinSpec,
}

pub fn make_nonconvex_sin(spec: NonconvexSinSpec) -> Result<NonconvexSin, ProblemError> {
    if spec.c.is_empty() {
        return Err(ProblemError::InvalidSpec("sine problem needs d >= 1"));
    }
    Ok(NonconvexSin { spec })
}

impl NonconvexSin {
    pub fn spec(&self) -> &NonconvexSinSpec {
        &self.spec
    }

    /// `x₀ = 0`, `yᵢ ~ U[−π, π]`.
    pub fn initial_point(&self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0003);
        let pi = core::f64::consts::PI;
        (
            vec![0.0],
            (0..self.spec.c.len())
                .map(|_| rng.random_range(-pi..pi))
                .collect(),
        )
    }

    fn phase(&self, x: &[f64], i: usize, yi: f64) -> f64 {
        x[0] + yi - self.spec.c[i]
    }
}

impl BilevelOracles for NonconvexSin {
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_y(&self) -> usize {
        self.spec.c.len()
    }
    fn f_value(&self, x: &[f64], y: &[f64]) -> f64 {
        let a = self.spec.a;
        (x[0] - a).powi(2)
            + y.iter()
                .zip(&self.spec.c)
                .map(|(yi, ci)| (yi - a - ci).powi(2))
                .sum::<f64>()
    }
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        y.iter()
            .enumerate()
            .map(|(i, yi)| self.phase(x, i, *yi).sin())
            .sum()
    }
    fn grad_f_x(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![2.0 * (x[0] - self.spec.a)]
    }
    fn grad_f_y(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.spec.c)
            .map(|(yi, ci)| 2.0 * (yi - self.spec.a - ci))
            .collect()
    }
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, yi)| self.phase(x, i, *yi).cos())
            .collect()
    }
    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        y.iter()
            .enumerate()
            .map(|(i, yi)| -self.phase(x, i, *yi).sin() * v[i])
            .collect()
    }
    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        vec![y
            .iter()
            .enumerate()
            .map(|(i, yi)| -self.phase(x, i, *yi).sin() * v[i])
            .sum()]
    }
}
