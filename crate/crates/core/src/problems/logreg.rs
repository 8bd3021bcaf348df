use alloc::vec;
use alloc::vec::Vec;

use super::classification::{ce_grad, ce_hvp, ce_value, softmax_accuracy, Dataset};
use super::{check_len, ProblemError};
use crate::bilevel::BilevelOracles;

/// Per-feature regularization selection for a linear softmax classifier:
///
/// ```text
/// g(ζ, W) = (1/n) Σᵢ CE(W xᵢ, yᵢ) + (1/(c·l)) Σₖ Σⱼ ζⱼ² Wₖⱼ²
/// f(ζ, W) = (1/n_val) Σ CE on the validation rows
/// ```
#[derive(Debug, Clone)]
pub struct LogRegSpec {
    pub train: Dataset,
    pub val: Dataset,
    pub classes: usize,
}

#[derive(Debug, Clone)]
pub struct LogReg {
    spec: LogRegSpec,
    /// `1 / (c·l)`
    reg_scale: f64,
}

pub fn make_logreg(spec: LogRegSpec) -> Result<LogReg, ProblemError> {
    check_len("validation feature dim", spec.train.dim(), spec.val.dim())?;
    spec.train.check_classes(spec.classes)?;
    spec.val.check_classes(spec.classes)?;
    if spec.train.is_empty() || spec.val.is_empty() {
        return Err(ProblemError::InvalidSpec(
            "logistic regression needs training and validation rows",
        ));
    }
    let reg_scale = 1.0 / (spec.classes * spec.train.dim()) as f64;
    Ok(LogReg { spec, reg_scale })
}

impl LogReg {
    pub fn spec(&self) -> &LogRegSpec {
        &self.spec
    }

    /// `ζ = 1`, `W = 0`.
    pub fn initial_point(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![1.0; self.dim_x()], vec![0.0; self.dim_y()])
    }

    pub fn accuracy(&self, w: &[f64], data: &Dataset) -> f64 {
        softmax_accuracy(w, self.spec.classes, data)
    }

    fn features(&self) -> usize {
        self.spec.train.dim()
    }
}

impl BilevelOracles for LogReg {
    fn dim_x(&self) -> usize {
        self.features()
    }
    fn dim_y(&self) -> usize {
        self.spec.classes * self.features()
    }
    fn f_value(&self, _x: &[f64], y: &[f64]) -> f64 {
        let inv = 1.0 / self.spec.val.len() as f64;
        ce_value(&self.spec.val, self.spec.classes, y, |_| inv)
    }
    fn g_value(&self, x: &[f64], y: &[f64]) -> f64 {
        let inv = 1.0 / self.spec.train.len() as f64;
        let l = self.features();
        let reg: f64 = y
            .iter()
            .enumerate()
            .map(|(idx, w)| x[idx % l] * x[idx % l] * w * w)
            .sum();
        ce_value(&self.spec.train, self.spec.classes, y, |_| inv) + self.reg_scale * reg
    }
    fn grad_f_x(&self, x: &[f64], _y: &[f64]) -> Vec<f64> {
        vec![0.0; x.len()]
    }
    fn grad_f_y(&self, _x: &[f64], y: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.spec.val.len() as f64;
        ce_grad(&self.spec.val, self.spec.classes, y, |_| inv)
    }
    fn grad_g_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.spec.train.len() as f64;
        let l = self.features();
        let mut g = ce_grad(&self.spec.train, self.spec.classes, y, |_| inv);
        for (idx, gi) in g.iter_mut().enumerate() {
            let z = x[idx % l];
            *gi += 2.0 * self.reg_scale * z * z * y[idx];
        }
        g
    }
    fn hvp_gyy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.spec.train.len() as f64;
        let l = self.features();
        let mut h = ce_hvp(&self.spec.train, self.spec.classes, y, v, |_| inv);
        for (idx, hi) in h.iter_mut().enumerate() {
            let z = x[idx % l];
            *hi += 2.0 * self.reg_scale * z * z * v[idx];
        }
        h
    }
    fn jvp_gxy(&self, x: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        // ∂/∂ζⱼ Σₖ 2/(cl) ζⱼ² Wₖⱼ Vₖⱼ
        let l = self.features();
        let mut out = vec![0.0; l];
        for (idx, (w, vi)) in y.iter().zip(v).enumerate() {
            out[idx % l] += w * vi;
        }
        out.iter_mut()
            .zip(x)
            .for_each(|(o, z)| *o *= 4.0 * self.reg_scale * z);
        out
    }
}
