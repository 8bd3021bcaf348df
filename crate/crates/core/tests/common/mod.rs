#![allow(dead_code)]

use lancbio_core::numeric::{spd_with_spectrum, DenseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect()
}

/// SPD matrix with eigenvalues spaced linearly on `[1, cond]`.
pub fn spd(n: usize, cond: f64, seed: u64) -> DenseMatrix {
    let eigs: Vec<f64> = (0..n)
        .map(|i| 1.0 + (cond - 1.0) * i as f64 / (n.max(2) - 1) as f64)
        .collect();
    spd_with_spectrum(&eigs, &mut rng(seed))
}

/// Symmetric matrix with the given spectrum in a random basis.
pub fn with_spectrum(eigs: &[f64], seed: u64) -> DenseMatrix {
    spd_with_spectrum(eigs, &mut rng(seed))
}

pub fn gram_minus_identity(basis: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, qi) in basis.iter().enumerate() {
        for (j, qj) in basis.iter().enumerate() {
            let d: f64 = qi.iter().zip(qj).map(|(a, b)| a * b).sum();
            worst = worst.max((d - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// `Qᵀ A Q` for a list of basis columns.
pub fn projected(a: &DenseMatrix, basis: &[Vec<f64>]) -> DenseMatrix {
    let j = basis.len();
    let aq: Vec<Vec<f64>> = basis.iter().map(|q| a.matvec(q)).collect();
    let mut out = DenseMatrix::zeros(j, j);
    for r in 0..j {
        for c in 0..j {
            out[(r, c)] = basis[r].iter().zip(&aq[c]).map(|(x, y)| x * y).sum();
        }
    }
    out
}
