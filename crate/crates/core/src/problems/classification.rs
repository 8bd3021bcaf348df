//! Labeled feature data and the softmax cross-entropy pieces shared by the
//! classification-based problems. Weights are stored row-major as a
//! `classes × dim` matrix flattened into one vector.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{check_len, ProblemError};
use crate::numeric::vector::{axpy, dot, norm, scale};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(ProblemError::InvalidSpec(
                "feature dimension must be positive",
            ));
        }
        check_len("feature matrix", labels.len() * dim, features.len())?;
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows `start..start + count`.
    pub fn slice(&self, start: usize, count: usize) -> Dataset {
        let end = (start + count).min(self.len());
        Dataset {
            features: self.features[start * self.dim..end * self.dim].to_vec(),
            labels: self.labels[start..end].to_vec(),
            dim: self.dim,
        }
    }

    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Dataset, ProblemError> {
        Dataset::new(self.features.clone(), labels, self.dim)
    }

    pub(crate) fn check_classes(&self, classes: usize) -> Result<(), ProblemError> {
        if classes == 0 {
            return Err(ProblemError::InvalidSpec("class count must be positive"));
        }
        if self.labels.iter().any(|l| *l >= classes) {
            return Err(ProblemError::InvalidSpec(
                "label out of range for class count",
            ));
        }
        Ok(())
    }
}

/// Gaussian clusters with unit noise. Class means sit at distance
/// `separation` from each other: `separation/√2 · e_k` for the first `dim`
/// classes, random directions of the same length beyond that.
pub fn gen_classification_data(
    n: usize,
    dim: usize,
    classes: usize,
    separation: f64,
    seed: u64,
) -> Dataset {
    assert!(
        n >= 1 && dim >= 1 && classes >= 1,
        "n, dim and classes must be positive"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = separation / core::f64::consts::SQRT_2;
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|k| {
            let mut m = vec![0.0; dim];
            if k < dim {
                m[k] = radius;
            } else {
                m.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let s = radius / norm(&m);
                scale(s, &mut m);
            }
            m
        })
        .collect();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..classes);
        labels.push(k);
        features.extend(
            means[k]
                .iter()
                .map(|m| m + rng.sample::<f64, _>(StandardNormal)),
        );
    }
    Dataset {
        features,
        labels,
        dim,
    }
}

/// With probability `p` each label is replaced by one drawn uniformly from
/// the other `classes − 1` labels.
pub fn corrupt_labels(labels: &[usize], classes: usize, p: f64, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels
        .iter()
        .map(|&l| {
            if classes < 2 || !rng.random_bool(p.clamp(0.0, 1.0)) {
                return l;
            }
            let other = rng.random_range(0..classes - 1);
            if other >= l {
                other + 1
            } else {
                other
            }
        })
        .collect()
}

/// Fraction of rows whose arg-max logit matches the label.
pub fn softmax_accuracy(weights: &[f64], classes: usize, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let mut z = vec![0.0; classes];
    let hits = (0..data.len())
        .filter(|&i| {
            logits_into(weights, classes, data.row(i), &mut z);
            let best = (0..classes).fold(0, |b, k| if z[k] > z[b] { k } else { b });
            best == data.labels()[i]
        })
        .count();
    hits as f64 / data.len() as f64
}

pub(crate) fn logits_into(w: &[f64], classes: usize, x: &[f64], out: &mut [f64]) {
    let l = x.len();
    for k in 0..classes {
        out[k] = dot(&w[k * l..(k + 1) * l], x);
    }
}

/// Overwrites logits with probabilities and returns log-sum-exp.
pub(crate) fn softmax_inplace(z: &mut [f64]) -> f64 {
    let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - zmax).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
    zmax + s.ln()
}

/// `Σᵢ wᵢ · CE(W xᵢ, yᵢ)`
pub(crate) fn ce_value(
    data: &Dataset,
    classes: usize,
    w: &[f64],
    weight: impl Fn(usize) -> f64,
) -> f64 {
    let mut z = vec![0.0; classes];
    (0..data.len())
        .map(|i| {
            logits_into(w, classes, data.row(i), &mut z);
            let target = z[data.labels()[i]];
            let lse = softmax_inplace(&mut z);
            weight(i) * (lse - target)
        })
        .sum()
}

/// `Σᵢ wᵢ (pᵢ − e_{yᵢ}) xᵢᵀ`
pub(crate) fn ce_grad(
    data: &Dataset,
    classes: usize,
    w: &[f64],
    weight: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let l = data.dim();
    let mut out = vec![0.0; classes * l];
    let mut z = vec![0.0; classes];
    for i in 0..data.len() {
        let wi = weight(i);
        if wi == 0.0 {
            continue;
        }
        let x = data.row(i);
        logits_into(w, classes, x, &mut z);
        softmax_inplace(&mut z);
        z[data.labels()[i]] -= 1.0;
        for k in 0..classes {
            axpy(wi * z[k], x, &mut out[k * l..(k + 1) * l]);
        }
    }
    out
}

/// `Σᵢ wᵢ (diag(pᵢ) − pᵢpᵢᵀ)(V xᵢ) xᵢᵀ`
pub(crate) fn ce_hvp(
    data: &Dataset,
    classes: usize,
    w: &[f64],
    v: &[f64],
    weight: impl Fn(usize) -> f64,
) -> Vec<f64> {
    let l = data.dim();
    let mut out = vec![0.0; classes * l];
    let mut p = vec![0.0; classes];
    let mut u = vec![0.0; classes];
    for i in 0..data.len() {
        let wi = weight(i);
        if wi == 0.0 {
            continue;
        }
        let x = data.row(i);
        logits_into(w, classes, x, &mut p);
        softmax_inplace(&mut p);
        logits_into(v, classes, x, &mut u);
        let pu = dot(&p, &u);
        for k in 0..classes {
            let s = p[k] * (u[k] - pu);
            axpy(wi * s, x, &mut out[k * l..(k + 1) * l]);
        }
    }
    out
}

/// Per-row `(pᵢ − e_{yᵢ}) · (V xᵢ)`
pub(crate) fn ce_directional(data: &Dataset, classes: usize, w: &[f64], v: &[f64]) -> Vec<f64> {
    let mut p = vec![0.0; classes];
    let mut u = vec![0.0; classes];
    (0..data.len())
        .map(|i| {
            let x = data.row(i);
            logits_into(w, classes, x, &mut p);
            softmax_inplace(&mut p);
            p[data.labels()[i]] -= 1.0;
            logits_into(v, classes, x, &mut u);
            dot(&p, &u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_labels() {
        let d = gen_classification_data(50, 3, 1, 1.0, 9);
        assert!(d.labels().iter().all(|l| *l == 0));
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(
            gen_classification_data(40, 4, 3, 1.0, 5),
            gen_classification_data(40, 4, 3, 1.0, 5)
        );
        assert_ne!(
            gen_classification_data(40, 4, 3, 1.0, 5),
            gen_classification_data(40, 4, 3, 1.0, 6)
        );
    }

    #[test]
    fn corruption_hits_only_wrong_labels() {
        let labels: Vec<usize> = (0..1000).map(|i| i % 5).collect();
        let noisy = corrupt_labels(&labels, 5, 1.0, 3);
        assert!(labels.iter().zip(&noisy).all(|(a, b)| a != b && *b < 5));
        assert_eq!(corrupt_labels(&labels, 5, 0.0, 3), labels);
        let half = corrupt_labels(&labels, 5, 0.5, 3);
        let flipped = labels.iter().zip(&half).filter(|(a, b)| a != b).count();
        assert!((400..600).contains(&flipped), "{flipped}");
    }
}
