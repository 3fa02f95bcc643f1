//! Minimal dense linear algebra: just enough to solve the small Newton
//! systems that arise per step (dimension n_x + n_y, typically 2–4).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("dimension mismatch: matrix is {rows}x{cols}, rhs has length {rhs}")]
    DimensionMismatch { rows: usize, cols: usize, rhs: usize },
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Solve `self * x = b` by LU decomposition with partial pivoting.
    /// `self` is consumed as factorization scratch.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.rows;
        if self.cols != n || b.len() != n {
            return Err(LinalgError::DimensionMismatch { rows: self.rows, cols: self.cols, rhs: b.len() });
        }
        let mut x = b.to_vec();
        for col in 0..n {
            // Pivot: largest magnitude on or below the diagonal.
            let pivot_row = (col..n)
                .max_by(|&a, &b| self[(a, col)].abs().total_cmp(&self[(b, col)].abs()))
                .unwrap();
            let pivot = self[(pivot_row, col)];
            if pivot.abs() < f64::EPSILON * self.max_abs().max(1.0) {
                return Err(LinalgError::Singular { col, pivot });
            }
            if pivot_row != col {
                for j in 0..n {
                    self.data.swap(col * n + j, pivot_row * n + j);
                }
                x.swap(col, pivot_row);
            }
            for row in col + 1..n {
                let factor = self[(row, col)] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    let sub = factor * self[(col, j)];
                    self[(row, j)] -= sub;
                }
                x[row] -= factor * x[col];
            }
        }
        // Back substitution.
        for col in (0..n).rev() {
            x[col] /= self[(col, col)];
            for row in 0..col {
                x[row] -= self[(row, col)] * x[col];
            }
        }
        Ok(x)
    }

    /// True iff the matrix (assumed symmetric) is positive definite,
    /// decided by attempting a Cholesky factorization.
    pub fn is_symmetric_positive_definite(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return false;
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        true
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
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

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Sum of absolute components.
pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Largest absolute component.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_well_conditioned_system() {
        let a = Matrix::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let x = a.clone().solve(&[1.0, 2.0]).unwrap();
        let r = a.mul_vec(&x);
        assert!((r[0] - 1.0).abs() < 1e-14);
        assert!((r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn solve_requires_pivoting() {
        // Zero on the leading diagonal forces a row swap.
        let a = Matrix::from_rows(&[&[0.0, 2.0], &[1.0, 1.0]]);
        let x = a.solve(&[2.0, 2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(a.solve(&[1.0, 1.0]), Err(LinalgError::Singular { .. })));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let a = Matrix::zeros(2, 2);
        assert!(matches!(a.solve(&[1.0]), Err(LinalgError::DimensionMismatch { .. })));
    }

    #[test]
    fn cholesky_detects_definiteness() {
        assert!(Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).is_symmetric_positive_definite());
        assert!(!Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).is_symmetric_positive_definite());
        assert!(!Matrix::from_rows(&[&[-1.0]]).is_symmetric_positive_definite());
    }

    #[test]
    fn larger_system_roundtrip() {
        let a = Matrix::from_rows(&[
            &[3.0, -1.0, 0.5, 0.0],
            &[-1.0, 4.0, 1.0, -0.5],
            &[0.5, 1.0, 5.0, 2.0],
            &[0.0, -0.5, 2.0, 6.0],
        ]);
        let b = [1.0, -2.0, 0.25, 3.0];
        let x = a.clone().solve(&b).unwrap();
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(b.iter()) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }
}
