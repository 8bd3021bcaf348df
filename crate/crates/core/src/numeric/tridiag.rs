use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::dense::DenseMatrix;
use super::vector::norm_inf;
use super::LinalgError;

/// Pivots below this fraction of `‖T‖_∞` are treated as breakdown.
const PIVOT_GUARD: f64 = 1e-12;
/// Smallest/largest diagonal ratio of the rotated factor below which a
/// least-squares problem is reported as rank deficient.
const RANK_GUARD: f64 = 1e-12;

/// Symmetric tridiagonal matrix holding one diagonal and one off-diagonal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new() -> Self {
        Self::default()
    }

    /// # Panics
    /// If `offdiag.len() + 1 != diag.len()` for a non-empty matrix.
    pub fn from_parts(diag: Vec<f64>, offdiag: Vec<f64>) -> Self {
        assert_eq!(
            offdiag.len(),
            diag.len().saturating_sub(1),
            "off-diagonal must be one shorter than the diagonal"
        );
        Self { diag, offdiag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Grows the matrix by one row and column: `alpha` lands on the new
    /// diagonal entry and `beta` on the new off-diagonal pair. For the first
    /// entry there is no off-diagonal slot and `beta` is dropped.
    pub fn push(&mut self, alpha: f64, beta: f64) {
        if !self.diag.is_empty() {
            self.offdiag.push(beta);
        }
        self.diag.push(alpha);
    }

    pub fn clear(&mut self) {
        self.diag.clear();
        self.offdiag.clear();
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.offdiag[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.offdiag[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.offdiag[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.offdiag[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.offdiag[i];
                m[(i + 1, i)] = self.offdiag[i];
            }
        }
        m
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.dim() {
            let b2 = if i == 0 {
                0.0
            } else {
                self.offdiag[i - 1] * self.offdiag[i - 1]
            };
            d = self.diag[i] - x - b2 / d;
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Eigenvalues in ascending order by bisection. These are the Ritz
    /// values when `T` comes from a Lanczos process.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        if n == 0 {
            return Vec::new();
        }
        let r = self.norm_inf();
        let (lo0, hi0) = (-r - 1.0, r + 1.0);
        let tol = f64::EPSILON * (r + 1.0) * 4.0;
        (0..n)
            .map(|k| {
                let (mut lo, mut hi) = (lo0, hi0);
                while hi - lo > tol {
                    let mid = 0.5 * (lo + hi);
                    if self.count_below(mid) > k {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }
}

/// Solves `T z = rhs` by an unpivoted `LDL^T` factorization, O(j).
pub fn solve_sym_tridiag(t: &SymTridiagonal, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = t.dim();
    if rhs.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: rhs.len(),
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let guard = PIVOT_GUARD * t.norm_inf();
    let (a, b) = (t.diag(), t.offdiag());
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n];
    d[0] = a[0];
    if d[0].abs() <= guard || !d[0].is_finite() {
        return Err(LinalgError::NearSingular {
            index: 0,
            pivot: d[0],
        });
    }
    for i in 1..n {
        l[i] = b[i - 1] / d[i - 1];
        d[i] = a[i] - l[i] * b[i - 1];
        if d[i].abs() <= guard || !d[i].is_finite() {
            return Err(LinalgError::NearSingular {
                index: i,
                pivot: d[i],
            });
        }
    }
    let mut z = rhs.to_vec();
    for i in 1..n {
        z[i] -= l[i] * z[i - 1];
    }
    for i in 0..n {
        z[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        z[i] -= l[i + 1] * z[i + 1];
    }
    Ok(z)
}

/// Minimizes `‖rhs_norm·e₁ − [T; β e_jᵀ] c‖₂` with plane rotations on the
/// `(j+1) × j` band.
pub fn tridiag_least_squares(
    t: &SymTridiagonal,
    beta_next: f64,
    rhs_norm: f64,
) -> Result<Vec<f64>, LinalgError> {
    let j = t.dim();
    if j == 0 {
        return Ok(Vec::new());
    }
    // dense (j+1) x j copy; j is the subspace dimension, so this stays tiny
    let mut h = DenseMatrix::zeros(j + 1, j);
    for i in 0..j {
        h[(i, i)] = t.diag()[i];
        if i + 1 < j {
            h[(i, i + 1)] = t.offdiag()[i];
            h[(i + 1, i)] = t.offdiag()[i];
        }
    }
    h[(j, j - 1)] = beta_next;
    let mut g = vec![0.0; j + 1];
    g[0] = rhs_norm;

    for k in 0..j {
        let (a, b) = (h[(k, k)], h[(k + 1, k)]);
        let r = a.hypot(b);
        if r == 0.0 {
            continue;
        }
        let (c, s) = (a / r, b / r);
        let last = (k + 3).min(j);
        for col in k..last {
            let (top, bot) = (h[(k, col)], h[(k + 1, col)]);
            h[(k, col)] = c * top + s * bot;
            h[(k + 1, col)] = -s * top + c * bot;
        }
        let (top, bot) = (g[k], g[k + 1]);
        g[k] = c * top + s * bot;
        g[k + 1] = -s * top + c * bot;
    }

    let diag: Vec<f64> = (0..j).map(|i| h[(i, i)].abs()).collect();
    let dmax = norm_inf(&diag);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if dmax == 0.0 || dmin < RANK_GUARD * dmax {
        let ratio = if dmax == 0.0 { 0.0 } else { dmin / dmax };
        return Err(LinalgError::RankDeficient { ratio });
    }
    let mut c = vec![0.0; j];
    for i in (0..j).rev() {
        let mut s = g[i];
        for col in (i + 1)..(i + 3).min(j) {
            s -= h[(i, col)] * c[col];
        }
        c[i] = s / h[(i, i)];
    }
    Ok(c)
}
