//! Dense PSD covariance matrices with a cached symmetric square root.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_CLAMP_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
enum Root {
    /// Diagonal covariance: `√Σ = diag(√σᵢᵢ)`, eigenvectors are the canonical basis.
    Diagonal(Vec<f64>),
    /// Row-major `√Σ` plus row-major eigenvector matrix (column `i` is `uᵢ`).
    Dense { root: Vec<f64>, eigenvectors: Vec<f64> },
}

/// Covariance `Σ` of a centered Gaussian noise model.
///
/// Eigenvalues below `−1e−12·λ_max` are rejected, the remaining negative ones
/// are clamped to zero. Singular matrices are accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    dim: usize,
    /// Row-major `d × d`, symmetrized.
    matrix: Vec<f64>,
    eigenvalues: Vec<f64>,
    root: Root,
    trace: f64,
}

impl CovarianceSpec {
    /// Builds from a row-major `d × d` matrix via symmetric eigendecomposition.
    pub fn from_dense(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidCovariance("dimension must be at least 1".into()));
        }
        check_dim(dim * dim, matrix.len())?;
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        let scale = matrix.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (matrix[i * dim + j], matrix[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::InvalidCovariance(format!(
                        "not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let mut sym = matrix;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (sym[i * dim + j] + sym[j * dim + i]);
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg;
            }
        }
        if sym.iter().enumerate().all(|(k, v)| k / dim == k % dim || *v == 0.0) {
            let diag = (0..dim).map(|i| sym[i * dim + i]).collect();
            return Self::from_diagonal(diag);
        }

        let eig = DMatrix::from_row_slice(dim, dim, &sym).symmetric_eigen();
        let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let eigenvalues = clamp_eigenvalues(&raw)?;
        let u = &eig.eigenvectors;
        let mut root = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                root[i * dim + j] = (0..dim)
                    .map(|k| u[(i, k)] * eigenvalues[k].sqrt() * u[(j, k)])
                    .sum();
            }
        }
        let mut eigenvectors = vec![0.0; dim * dim];
        for i in 0..dim {
            for k in 0..dim {
                eigenvectors[i * dim + k] = u[(i, k)];
            }
        }
        let trace = (0..dim).map(|i| sym[i * dim + i]).sum();
        Ok(Self {
            dim,
            matrix: sym,
            eigenvalues,
            root: Root::Dense { root, eigenvectors },
            trace,
        })
    }

    /// Diagonal covariance `diag(variances)`; no decomposition needed.
    pub fn from_diagonal(variances: Vec<f64>) -> Result<Self> {
        let dim = variances.len();
        if dim == 0 {
            return Err(Error::InvalidCovariance("dimension must be at least 1".into()));
        }
        if variances.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        let eigenvalues = clamp_eigenvalues(&variances)?;
        let mut matrix = vec![0.0; dim * dim];
        for (i, v) in eigenvalues.iter().enumerate() {
            matrix[i * dim + i] = *v;
        }
        let trace = eigenvalues.iter().sum();
        Ok(Self {
            dim,
            matrix,
            root: Root::Diagonal(eigenvalues.iter().map(|v| v.sqrt()).collect()),
            eigenvalues,
            trace,
        })
    }

    /// White noise `I/d`.
    pub fn white(dim: usize) -> Result<Self> {
        Self::from_diagonal(vec![1.0 / dim as f64; dim])
    }

    /// `Σ / Tr(Σ)`.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.trace > 0.0) {
            return Err(Error::InvalidCovariance("zero trace cannot be normalized".into()));
        }
        let t = self.trace;
        let mut out = self.clone();
        out.matrix.iter_mut().for_each(|v| *v /= t);
        out.eigenvalues.iter_mut().for_each(|v| *v /= t);
        let s = t.sqrt();
        match &mut out.root {
            Root::Diagonal(r) => r.iter_mut().for_each(|v| *v /= s),
            Root::Dense { root, .. } => root.iter_mut().for_each(|v| *v /= s),
        }
        out.trace = (0..out.dim).map(|i| out.matrix[i * out.dim + i]).sum();
        Ok(out)
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace - 1.0).abs() <= TRACE_TOL
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// `Tr(Σ²) = Σ λᵢ²` over the eigenvalues of `Σ`.
    pub fn trace_of_square(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v * v).sum()
    }

    /// Row-major `Σ`.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.root, Root::Diagonal(_))
    }

    /// Eigenvalues of `Σ` (clamped, in decomposition order).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unit eigenvector paired with `eigenvalues()[i]`.
    pub fn eigenvector(&self, i: usize) -> Vec<f64> {
        match &self.root {
            Root::Diagonal(_) => {
                let mut e = vec![0.0; self.dim];
                e[i] = 1.0;
                e
            }
            Root::Dense { eigenvectors, .. } => {
                (0..self.dim).map(|r| eigenvectors[r * self.dim + i]).collect()
            }
        }
    }

    /// `out = √Σ · z`.
    pub fn apply_root(&self, z: &[f64], out: &mut [f64]) {
        match &self.root {
            Root::Diagonal(r) => out
                .iter_mut()
                .zip(r.iter().zip(z))
                .for_each(|(o, (ri, zi))| *o = ri * zi),
            Root::Dense { root, .. } => {
                for (o, row) in out.iter_mut().zip(root.chunks_exact(self.dim)) {
                    *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
}

fn clamp_eigenvalues(raw: &[f64]) -> Result<Vec<f64>> {
    let max = raw.iter().copied().fold(0.0_f64, f64::max);
    let floor = -EIGEN_CLAMP_TOL * max;
    if let Some(v) = raw.iter().find(|&&v| v < floor || (max == 0.0 && v < 0.0)) {
        return Err(Error::InvalidCovariance(format!(
            "negative eigenvalue {v} (largest is {max})"
        )));
    }
    Ok(raw.iter().map(|&v| v.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_root_squares_back() {
        let m = [2.0, 1.0, 1.0, 2.0];
        let c = CovarianceSpec::from_dense(2, m.iter().map(|v| v / 4.0).collect()).unwrap();
        assert!(!c.is_diagonal());
        assert!((c.trace() - 1.0).abs() < 1e-15);
        assert!(c.is_normalized());
        // (√Σ)² = Σ
        let mut col = [0.0; 2];
        for j in 0..2 {
            let mut e = [0.0; 2];
            e[j] = 1.0;
            let mut r = [0.0; 2];
            c.apply_root(&e, &mut r);
            c.apply_root(&r, &mut col);
            for (i, v) in col.iter().enumerate() {
                assert!((v - c.matrix()[i * 2 + j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        assert!(CovarianceSpec::from_dense(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(CovarianceSpec::from_dense(2, vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(CovarianceSpec::from_diagonal(vec![1.0, -0.1]).is_err());
        assert!(CovarianceSpec::from_dense(2, vec![1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn clamps_roundoff_negatives() {
        let c = CovarianceSpec::from_diagonal(vec![1.0, -1e-15]).unwrap();
        assert_eq!(c.eigenvalues(), &[1.0, 0.0]);
        // rank-one dense matrix: one eigenvalue is roundoff around zero
        let u = [0.6, 0.8];
        let m: Vec<f64> = (0..4).map(|k| u[k / 2] * u[k % 2]).collect();
        let c = CovarianceSpec::from_dense(2, m).unwrap();
        assert!(c.eigenvalues().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn normalization() {
        let c = CovarianceSpec::from_diagonal(vec![10.0, 0.0, 5.0]).unwrap().normalized().unwrap();
        assert!(c.is_normalized());
        assert!((c.matrix()[0] - 10.0 / 15.0).abs() < 1e-15);
        assert!(CovarianceSpec::from_diagonal(vec![0.0, 0.0]).unwrap().normalized().is_err());
        let w = CovarianceSpec::white(4).unwrap();
        assert!((w.trace_of_square() - 0.25).abs() < 1e-15);
    }
}
