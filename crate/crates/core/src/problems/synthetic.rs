use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_len, ProblemError};
use crate::bilevel::BilevelOracles;
use crate::numeric::vector::dot;
use crate::numeric::{spd_with_spectrum, DenseMatrix};

/// Parameters of the trigonometric / log-sum-exp problem
///
/// ```text
/// f(x, y) = c₁ cos(xᵀD₁y) + ½‖D₂x − y‖²
/// g(x, y) = c₂ Σ sin(xᵢ + yᵢ) + log Σ exp(xᵢyᵢ) + ½ yᵀ(D₃ + G) y
/// ```
///
/// with diagonal `D₁, D₂, D₃` stored as vectors and dense SPD `G`.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub c1: f64,
    pub c2: f64,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub g: DenseMatrix,
}

impl SyntheticSpec {
    pub const DEFAULT_C1: f64 = 0.1;
    pub const DEFAULT_C2: f64 = 0.5;
    pub const G_EIG_MIN: f64 = 1.0;
    pub const G_EIG_MAX: f64 = 1e5;

    /// Seeded instance: `D₁ ~ U[−5, 5]`, `D₂ ~ U[0.1, 1.1]`, `D₃ ~ U[0, 0.5]`,
    /// and `G` with eigenvalues evenly spaced on `[1, 1e5]` in a random
    /// orthonormal basis.
    pub fn random(d: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d1 = (0..d).map(|_| rng.random_range(-5.0..=5.0)).collect();
        let d2 = (0..d).map(|_| rng.random_range(0.1..=1.1)).collect();
        let d3 = (0..d).map(|_| rng.random_range(0.0..=0.5)).collect();
        let eigs: Vec<f64> = (0..d)
            .map(|i| {
                if d == 1 {
                    Self::G_EIG_MIN
                } else {
                    Self::G_EIG_MIN
                        + (Self::G_EIG_MAX - Self::G_EIG_MIN) * i as f64 / (d - 1) as f64
                }
            })
            .collect();
        let g = spd_with_spectrum(&eigs, &mut rng);
        Self {
            c1: Self::DEFAULT_C1,
            c2: Self::DEFAULT_C2,
            d1,
            d2,
            d3,
            g,
        }
    }

    pub fn dim(&self) -> usize {
        self.d1.len()
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        let d = self.dim();
        if d == 0 {
            return Err(ProblemError::InvalidSpec(
                "synthetic dimension must be positive",
            ));
        }
        check_len("D2", d, self.d2.len())?;
        check_len("D3", d, self.d3.len())?;
        check_len("G rows", d, self.g.rows())?;
        check_len("G cols", d, self.g.cols())?;
        if self.d3.iter().any(|v| *v < 0.0) {
            return Err(ProblemError::InvalidSpec("D3 must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    spec: SyntheticSpec,
    /// `G + D₃`
    quad: DenseMatrix,
}

pub fn make_synthetic(spec: SyntheticSpec) -> Result<Synthetic, ProblemError> {
    spec.validate()?;
    let mut quad = spec.g.clone();
    for (i, d3) in spec.d3.iter().enumerate() {
        quad[(i, i)] += d3;
    }
    Ok(Synthetic { spec, quad })
}

/// softmax of `x ∘ y`, max-shifted
fn softmax_xy(x: &[f64], y: &[f64]) -> Vec<f64> {
    let zmax = x
        .iter()
        .zip(y)
        .map(|(a, b)| a * b)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a * b - zmax).exp()).collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= s);
    p
}

impl Synthetic {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    /// Seeded start: `x₀ ~ N(0, I)`, `y₀ = 0`.
    pub fn initial_point(&self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001);
        let d = self.spec.dim();
        (
            (0..d).map(|_| rng.sample(StandardNormal)).collect(),
            vec![0.0; d],
        )
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(&self.spec.d1)
            .zip(y)
            .map(|((a, d), b)| a * d * b)
            .sum()
    }
}

impl BilevelOracles for Synthetic {
    fn dim_x(&self) -> usize {
        self.spec.dim()
    }
    fn dim_y(&self) -> usize {
        self.spec.dim()
    }

    fn f_value(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(&self.spec.d2)
            .zip(y)
            .map(|((a, d), b)| (d * a - b).powi(2))
            .sum();
        self.spec.c1 * self.inner(x, y).cos() + 0.5 * r2
    }

    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        let trig: f64 = x.iter().zip(y).map(|(a, b)| (a + b).sin()).sum();
        let zmax = x
            .iter()
            .zip(y)
            .map(|(a, b)| a * b)
            .fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax
            + x.iter()
                .zip(y)
                .map(|(a, b)| (a * b - zmax).exp())
                .sum::<f64>()
                .ln();
        self.spec.c2 * trig + lse + 0.5 * dot(y, &self.quad.matvec(y))
    }

    fn grad_f_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let s = -self.spec.c1 * self.inner(x, y).sin();
        (0..x.len())
            .map(|i| {
                let d2 = self.spec.d2[i];
                s * self.spec.d1[i] * y[i] + d2 * (d2 * x[i] - y[i])
            })
            .collect()
    }

    fn grad_f_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let s = -self.spec.c1 * self.inner(x, y).sin();
        (0..x.len())
            .map(|i| s * self.spec.d1[i] * x[i] - (self.spec.d2[i] * x[i] - y[i]))
            .collect()
    }

    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let p = softmax_xy(x, y);
        let mut g = self.quad.matvec(y);
        for i in 0..x.len() {
            g[i] += self.spec.c2 * (x[i] + y[i]).cos() + x[i] * p[i];
        }
        g
    }

    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        let p = softmax_xy(x, y);
        let xp_v: f64 = (0..x.len()).map(|i| x[i] * p[i] * v[i]).sum();
        let mut out = self.quad.matvec(v);
        for i in 0..x.len() {
            let xp = x[i] * p[i];
            out[i] += -self.spec.c2 * (x[i] + y[i]).sin() * v[i] + x[i] * xp * v[i] - xp * xp_v;
        }
        out
    }

    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        // ∂/∂x_j of c₂cos(x_i+y_i)v_i + x_i p_i v_i summed over i
        let p = softmax_xy(x, y);
        let xp_v: f64 = (0..x.len()).map(|i| x[i] * p[i] * v[i]).sum();
        (0..x.len())
            .map(|j| {
                -self.spec.c2 * (x[j] + y[j]).sin() * v[j]
                    + p[j] * v[j]
                    + y[j] * p[j] * (x[j] * v[j] - xp_v)
            })
            .collect()
    }
}
