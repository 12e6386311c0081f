//! Dense matrices and a cyclic Jacobi eigenvalue routine for symmetric matrices.
//!
//! Only what the certificate derivations need: spectral norms and the largest
//! eigenvalue of `A + Aᵀ` for small systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Parameter("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    /// Column vector from a slice.
    pub fn column(v: &[f64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Parameter("matrix shape mismatch in add".into()));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Parameter("matrix shape mismatch in product".into()));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `y = M x`. Panics on dimension mismatch (caller bug).
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `y += M x`.
    pub fn mul_vec_acc(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension mismatch");
        for (i, yi) in y.iter_mut().enumerate().take(self.rows) {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *yi += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }

    /// Largest eigenvalue of the symmetric part `(M + Mᵀ)/2` scaled back, i.e.
    /// `λmax(M + Mᵀ)`.
    pub fn lambda_max_sym_sum(&self) -> Result<f64> {
        let s = self.add(&self.transpose())?;
        max_eigenvalue(&s)
    }

    /// Spectral norm `√λmax(MᵀM)`.
    pub fn spectral_norm(&self) -> Result<f64> {
        let gram = self.transpose().matmul(self)?;
        let lmax = max_eigenvalue(&gram)?;
        Ok(lmax.max(0.0).sqrt())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// Only the upper triangle is trusted for symmetry checks; an asymmetric
/// input beyond round-off is rejected.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::Numeric("eigenvalues of a non-square matrix".into()));
    }
    if !m.is_finite() {
        return Err(Error::Numeric("non-finite matrix entry".into()));
    }
    let n = m.rows();
    let scale = m.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::Numeric(format!(
                    "matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let mut a = m.clone();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    if eig.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(
            "Jacobi iteration produced non-finite values".into(),
        ));
    }
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

pub fn max_eigenvalue(m: &Matrix) -> Result<f64> {
    symmetric_eigenvalues(m)?
        .last()
        .copied()
        .ok_or_else(|| Error::Numeric("empty matrix".into()))
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let m = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert_eq!(symmetric_eigenvalues(&m).unwrap(), vec![-1.0, 3.0]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let e = symmetric_eigenvalues(&m).unwrap();
        assert_relative_eq!(e[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn spectral_norm_of_scaled_identity() {
        let c = Matrix::identity(3).scale(-0.2);
        assert_relative_eq!(c.spectral_norm().unwrap(), 0.2, epsilon = 1e-15);
        let ipc = Matrix::identity(3).add(&c).unwrap();
        assert_relative_eq!(ipc.spectral_norm().unwrap(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        // [1 2; 2 4] = v vᵀ with |v|² = 5
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_relative_eq!(m.spectral_norm().unwrap(), 5.0, epsilon = 1e-13);
    }

    #[test]
    fn rejects_asymmetric_and_non_finite() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(symmetric_eigenvalues(&m).is_err());
        let m = Matrix::from_rows(&[vec![f64::NAN, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(symmetric_eigenvalues(&m), Err(Error::Numeric(_))));
    }

    #[test]
    fn mul_vec_matches_matmul() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let x = [1.0, -1.0, 2.0];
        let y = a.mul_vec(&x);
        let y2 = a.matmul(&Matrix::column(&x)).unwrap();
        assert_eq!(y, vec![y2[(0, 0)], y2[(1, 0)]]);
    }
}
