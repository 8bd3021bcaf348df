use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::classification::{ce_directional, ce_grad, ce_hvp, ce_value, softmax_accuracy, Dataset};
use super::{check_len, ProblemError};
use crate::bilevel::BilevelOracles;
use crate::numeric::vector::{axpy, dot};

/// Data hyper-cleaning: the upper variable holds one confidence logit per
/// training sample, the lower variable is a linear softmax classifier.
///
/// ```text
/// g(λ, W) = (1/n) Σᵢ σ(λᵢ) CE(W xᵢ, yᵢ) + C_r ‖W‖²
/// f(λ, W) = (1/n_val) Σⱼ CE(W xⱼ, yⱼ)
/// ```
#[derive(Debug, Clone)]
pub struct HyperCleanSpec {
    /// Training rows, labels already corrupted.
    pub train: Dataset,
    pub val: Dataset,
    pub classes: usize,
    pub c_r: f64,
}

impl HyperCleanSpec {
    pub const DEFAULT_C_R: f64 = 1e-3;
}

#[derive(Debug, Clone)]
pub struct HyperClean {
    spec: HyperCleanSpec,
}

pub fn make_hyperclean(spec: HyperCleanSpec) -> Result<HyperClean, ProblemError> {
    check_len("validation feature dim", spec.train.dim(), spec.val.dim())?;
    spec.train.check_classes(spec.classes)?;
    spec.val.check_classes(spec.classes)?;
    if spec.train.is_empty() || spec.val.is_empty() {
        return Err(ProblemError::InvalidSpec(
            "hyper-cleaning needs training and validation rows",
        ));
    }
    if !(spec.c_r > 0.0) {
        return Err(ProblemError::InvalidSpec("C_r must be positive"));
    }
    Ok(HyperClean { spec })
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

impl HyperClean {
    pub fn spec(&self) -> &HyperCleanSpec {
        &self.spec
    }

    /// `λ = 0` (every sample at confidence ½), `W = 0`.
    pub fn initial_point(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0; self.dim_x()], vec![0.0; self.dim_y()])
    }

    pub fn accuracy(&self, w: &[f64], data: &Dataset) -> f64 {
        softmax_accuracy(w, self.spec.classes, data)
    }

    /// Mean cross-entropy of the classifier on `data`.
    pub fn loss(&self, w: &[f64], data: &Dataset) -> f64 {
        let inv = 1.0 / data.len() as f64;
        ce_value(data, self.spec.classes, w, |_| inv)
    }

    fn train_weight<'a>(&'a self, x: &'a [f64]) -> impl Fn(usize) -> f64 + 'a {
        let inv = 1.0 / self.spec.train.len() as f64;
        move |i| inv * sigmoid(x[i])
    }
}

impl BilevelOracles for HyperClean {
    fn dim_x(&self) -> usize {
        self.spec.train.len()
    }
    fn dim_y(&self) -> usize {
        self.spec.classes * self.spec.train.dim()
    }
    fn f_value(&self, _x: &[f64], y: &[f64]) -> f64 {
        self.loss(y, &self.spec.val)
    }
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        ce_value(&self.spec.train, self.spec.classes, y, self.train_weight(x))
            + self.spec.c_r * dot(y, y)
    }
    fn grad_f_x(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn grad_f_y(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.spec.val.len() as f64;
        ce_grad(&self.spec.val, self.spec.classes, y, |_| inv)
    }
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = ce_grad(&self.spec.train, self.spec.classes, y, self.train_weight(x));
        axpy(2.0 * self.spec.c_r, y, &mut g);
        g
    }
    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        let mut h = ce_hvp(
            &self.spec.train,
            self.spec.classes,
            y,
            v,
            self.train_weight(x),
        );
        axpy(2.0 * self.spec.c_r, v, &mut h);
        h
    }
    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.spec.train.len() as f64;
        let dir = ce_directional(&self.spec.train, self.spec.classes, y, v);
        dir.iter()
            .zip(x)
            .map(|(d, xi)| {
                let s = sigmoid(*xi);
                inv * s * (1.0 - s) * d
            })
            .collect()
    }
}
