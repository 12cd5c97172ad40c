//! Cholesky factors of covariance matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor accepted before factorisation.
pub const PSD_FLOOR: f64 = 1e-10;
/// Diagonal jitter ladder, relative to the trace.
const JITTER_START: f64 = 1e-14;
const JITTER_MAX: f64 = 1e-10;

/// Packed lower-triangular matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerFactor {
    dim: usize,
    data: Vec<f64>,
    jitter: f64,
}

impl LowerFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Diagonal jitter that was added (absolute), zero when the plain
    /// factorisation succeeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i && i < self.dim);
        self.data[i * (i + 1) / 2 + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }

    /// `out = L[..k, ..k] · xi` for the leading `k×k` block.
    pub fn mul_leading(&self, k: usize, xi: &[f64], out: &mut [f64]) {
        debug_assert!(k <= self.dim && xi.len() >= k && out.len() >= k);
        for (i, o) in out.iter_mut().enumerate().take(k) {
            *o = self.row(i).iter().zip(xi).map(|(l, x)| l * x).sum();
        }
    }

    /// Rank-one factor with first column `col` and zeros elsewhere.
    pub fn rank_one(col: &[f64]) -> Self {
        let dim = col.len();
        let mut data = vec![0.0; dim * (dim + 1) / 2];
        for (i, &c) in col.iter().enumerate() {
            data[i * (i + 1) / 2] = c;
        }
        LowerFactor {
            dim,
            data,
            jitter: 0.0,
        }
    }

    /// Reconstruct `L Lᵀ` (row-major), mostly for tests.
    pub fn product(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = self
                    .row(i)
                    .iter()
                    .zip(self.row(j))
                    .map(|(a, b)| a * b)
                    .sum();
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// Smallest eigenvalue of a symmetric row-major matrix.
pub fn min_eigenvalue(cov: &[f64], dim: usize) -> f64 {
    let m = DMatrix::from_row_slice(dim, dim, cov);
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a covariance matrix, adding diagonal jitter from
/// `1e-14·trace` up to `1e-10·trace` when the plain factorisation fails.
///
/// The matrix must pass an eigenvalue floor of `−1e-10·trace` first.
pub fn cholesky_psd(cov: &[f64], dim: usize) -> Result<LowerFactor> {
    if cov.len() != dim * dim {
        return Err(Error::invalid("covariance has the wrong shape"));
    }
    if dim == 0 {
        return Ok(LowerFactor {
            dim,
            data: Vec::new(),
            jitter: 0.0,
        });
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::CovarianceFailure("non-finite entry".into()));
    }
    let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
    if trace < 0.0 {
        return Err(Error::CovarianceFailure(format!("negative trace {trace}")));
    }
    if trace == 0.0 {
        return Ok(LowerFactor {
            dim,
            data: vec![0.0; dim * (dim + 1) / 2],
            jitter: 0.0,
        });
    }
    let base = DMatrix::from_row_slice(dim, dim, cov);
    if let Some(chol) = base.clone().cholesky() {
        return Ok(pack(chol.l(), 0.0));
    }
    let lambda_min = min_eigenvalue(cov, dim);
    if lambda_min < -PSD_FLOOR * trace {
        return Err(Error::CovarianceFailure(format!(
            "smallest eigenvalue {lambda_min:e} below −{PSD_FLOOR:e}·trace"
        )));
    }
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * trace;
        let mut m = base.clone();
        for i in 0..dim {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok(pack(chol.l(), jitter));
        }
        rel *= 10.0;
    }
    Err(Error::CovarianceFailure(format!(
        "not positive definite with jitter {JITTER_MAX:e}·trace"
    )))
}

fn pack(l: DMatrix<f64>, jitter: f64) -> LowerFactor {
    let dim = l.nrows();
    let mut data = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in 0..=i {
            data.push(l[(i, j)]);
        }
    }
    LowerFactor { dim, data, jitter }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_reproduces_matrix() {
        let cov = [4.0, 2.0, 0.4, 2.0, 2.0, 0.5, 0.4, 0.5, 1.0];
        let l = cholesky_psd(&cov, 3).unwrap();
        assert_eq!(l.jitter(), 0.0);
        for (a, b) in l.product().iter().zip(&cov) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_gets_jitter() {
        // perfectly correlated drivers
        let cov = [1.0, 1.0, 1.0, 1.0];
        let l = cholesky_psd(&cov, 2).unwrap();
        assert!(l.jitter() > 0.0 && l.jitter() <= 1e-10 * 2.0);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let cov = [1.0, 2.0, 2.0, 1.0];
        assert!(matches!(
            cholesky_psd(&cov, 2),
            Err(Error::CovarianceFailure(_))
        ));
    }

    #[test]
    fn leading_block_product() {
        let cov = [4.0, 2.0, 2.0, 2.0];
        let l = cholesky_psd(&cov, 2).unwrap();
        let mut out = [0.0; 2];
        l.mul_leading(1, &[1.5, 7.0], &mut out);
        assert_eq!(out[0], 3.0);
    }
}
