//! Dense square matrices and the few factorizations the library needs.
//!
//! The matrices in this crate are small (d up to a few hundred), symmetric
//! and dense, so a flat row-major buffer plus textbook algorithms (cyclic
//! Jacobi, Cholesky) covers everything without pulling in a linear-algebra
//! dependency.

use crate::error::{Error, Result};

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(SquareMatrix { n, data })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let row = self.row(i);
            let mut s = 0.0;
            for j in 0..self.n {
                s += row[j] * x[j];
            }
            out[i] = s;
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest |a_ij − a_ji| over all pairs.
    pub fn max_asymmetry(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }

    /// Replace both (i,j) and (j,i) by their average.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        SquareMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &SquareMatrix) -> Self {
        debug_assert_eq!(self.n, other.n);
        SquareMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Rank-one update: self += s * v vᵀ.
    pub fn add_outer(&mut self, v: &[f64], s: f64) {
        debug_assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            let vi = s * v[i];
            for j in 0..self.n {
                self.data[i * self.n + j] += vi * v[j];
            }
        }
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Cholesky factorization A = L Lᵀ. Fails if a pivot is not strictly
    /// positive.
    pub fn cholesky(&self) -> Result<Lower> {
        let n = self.n;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(Error::DegenerateMatrix(format!(
                            "cholesky pivot {s:e} at index {i}"
                        )));
                    }
                    l[i * n + i] = s.sqrt();
                } else {
                    l[i * n + j] = s / l[j * n + j];
                }
            }
        }
        Ok(Lower { n, data: l })
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
    /// Returns eigenvalues in nonincreasing order with matching
    /// eigenvectors as columns of the second component.
    pub fn sym_eigen(&self) -> (Vec<f64>, SquareMatrix) {
        let n = self.n;
        let mut a = self.clone();
        a.symmetrize();
        let mut v = SquareMatrix::identity(n);
        if n == 1 {
            return (vec![a.get(0, 0)], v);
        }

        let frob: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tol = 1e-15 * frob.max(f64::MIN_POSITIVE);

        for _sweep in 0..100 {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a.get(i, j).powi(2);
                }
            }
            if (2.0 * off).sqrt() <= tol {
                break;
            }
            for p in 0..n - 1 {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= 1e-300 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = if theta >= 0.0 {
                        1.0 / (theta + (1.0 + theta * theta).sqrt())
                    } else {
                        -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    // Update rows/columns p and q of A.
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    // Accumulate rotations.
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a.get(j, j)
                .partial_cmp(&a.get(i, i))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
        let mut vectors = SquareMatrix::zeros(n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for k in 0..n {
                vectors.set(k, new_col, v.get(k, old_col));
            }
        }
        (values, vectors)
    }

    /// Smallest eigenvalue of a symmetric matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = self.sym_eigen();
        *vals.last().expect("nonempty matrix")
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Debug, Clone)]
pub struct Lower {
    n: usize,
    data: Vec<f64>,
}

impl Lower {
    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// out = L x (for sampling: mean + L g with g standard normal).
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.data[i * self.n + j] * x[j];
            }
            out[i] = s;
        }
    }

    /// Solve L y = b by forward substitution.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.data[i * self.n + j] * y[j];
            }
            y[i] = s / self.data[i * self.n + i];
        }
        y
    }

    pub fn diag_product(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_diagonal_matrix() {
        let m = SquareMatrix::diagonal(&[3.0, 2.0, 1.0]);
        let (vals, vecs) = m.sym_eigen();
        assert_eq!(vals, vec![3.0, 2.0, 1.0]);
        for i in 0..3 {
            assert_eq!(vecs.get(i, i).abs(), 1.0);
        }
    }

    #[test]
    fn jacobi_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let m = SquareMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let (vals, vecs) = m.sym_eigen();
        assert!((vals[0] - 3.0).abs() < 1e-13);
        assert!((vals[1] - 1.0).abs() < 1e-13);
        // eigenvector for 3 is (1,1)/sqrt(2) up to sign
        let r = (vecs.get(0, 0) / vecs.get(1, 0)).abs();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs() {
        // A = Q diag Q^T reconstruction on a fixed symmetric matrix.
        let m = SquareMatrix::from_rows(&[
            vec![4.0, 1.0, 0.5, 0.0],
            vec![1.0, 3.0, 0.2, 0.1],
            vec![0.5, 0.2, 2.0, 0.3],
            vec![0.0, 0.1, 0.3, 1.0],
        ])
        .unwrap();
        let (vals, q) = m.sym_eigen();
        let mut recon = SquareMatrix::zeros(4);
        for c in 0..4 {
            let col: Vec<f64> = (0..4).map(|r| q.get(r, c)).collect();
            recon.add_outer(&col, vals[c]);
        }
        assert!(m.max_abs_diff(&recon) < 1e-12);
        let tr: f64 = vals.iter().sum();
        assert!((tr - m.trace()).abs() < 1e-12);
    }

    #[test]
    fn cholesky_roundtrip_and_failure() {
        let m = SquareMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = m.cholesky().unwrap();
        let mut recon = SquareMatrix::zeros(2);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += l.get(i, k) * l.get(j, k);
                }
                recon.set(i, j, s);
            }
        }
        assert!(m.max_abs_diff(&recon) < 1e-14);

        let bad = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(bad.cholesky().is_err());
    }

    #[test]
    fn forward_solve_matches() {
        let m = SquareMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = m.cholesky().unwrap();
        let y = l.forward_solve(&[2.0, 1.0]);
        // L y = b
        assert!((l.get(0, 0) * y[0] - 2.0).abs() < 1e-14);
        assert!((l.get(1, 0) * y[0] + l.get(1, 1) * y[1] - 1.0).abs() < 1e-14);
    }
}
