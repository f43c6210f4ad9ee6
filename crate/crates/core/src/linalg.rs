//! Dense square matrices and an in-place Cholesky factorization.
//!
//! Matrices are row-major `f64`. The streaming scatter accumulator only
//! writes the upper triangle; `mirror_upper` copies it to the lower half
//! before anything reads the full matrix.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from row-major data of length `dim * dim`.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        check_len(dim * dim, data.len())?;
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.dim;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Sum of squared entries; equals tr(A²) for symmetric A.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Copies the upper triangle onto the lower one.
    pub fn mirror_upper(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                self.data[j * n + i] = self.data[i * n + j];
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_to_diagonal(&mut self, value: f64) {
        for i in 0..self.dim {
            self[(i, i)] += value;
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim, v.len())?;
        Ok((0..self.dim).map(|i| dot(self.row(i), v)).collect())
    }

    /// Heap footprint of the entries in bytes.
    pub fn heap_bytes(&self) -> usize {
        self.data.capacity() * std::mem::size_of::<f64>()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`, stored in place of
/// the input matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    factor: Matrix,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix, reading only its lower
    /// triangle. Fails with the index of the first non-positive pivot.
    pub fn factor(mut a: Matrix) -> Result<Self> {
        let n = a.dim;
        for i in 0..n {
            for j in 0..=i {
                let (head, tail) = a.data.split_at_mut(i * n);
                let row_i = &tail[..n];
                let row_j = if j == i { row_i } else { &head[j * n..(j + 1) * n] };
                let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    tail[i] = s.sqrt();
                } else {
                    let pivot = head[j * n + j];
                    tail[j] = s / pivot;
                }
            }
            for v in &mut a.data[i * n + i + 1..(i + 1) * n] {
                *v = 0.0;
            }
        }
        Ok(Self { factor: a })
    }

    pub fn dim(&self) -> usize {
        self.factor.dim
    }

    pub fn lower(&self) -> &Matrix {
        &self.factor
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.factor[(i, i)].ln()).sum::<f64>()
    }

    /// Solves `A x = b` in place: forward substitution with `L`, then back
    /// substitution with `Lᵀ` done row by row over `L`.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        let n = self.dim();
        check_len(n, b.len())?;
        let l = &self.factor;
        for i in 0..n {
            let row = l.row(i);
            b[i] = (b[i] - dot(&row[..i], &b[..i])) / row[i];
        }
        for i in (0..n).rev() {
            let row = l.row(i);
            b[i] /= row[i];
            let xi = b[i];
            axpy(-xi, &row[..i], &mut b[..i]);
        }
        Ok(())
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_spd(dim: usize, seed: u64) -> Matrix {
        let mut rng = SeededRng::new(seed);
        let g = Matrix::from_fn(dim, |_, _| rng.standard_normal());
        Matrix::from_fn(dim, |i, j| {
            dot(g.row(i), g.row(j)) + if i == j { dim as f64 } else { 0.0 }
        })
    }

    #[test]
    fn factor_reconstructs_input() {
        let a = random_spd(17, 1);
        let chol = Cholesky::factor(a.clone()).unwrap();
        let l = chol.lower();
        for i in 0..17 {
            for j in 0..17 {
                let v = dot(l.row(i), l.row(j));
                assert!((v - a[(i, j)]).abs() < 1e-9 * a.max_abs());
            }
        }
    }

    #[test]
    fn solve_has_small_residual() {
        let a = random_spd(40, 2);
        let chol = Cholesky::factor(a.clone()).unwrap();
        let mut rng = SeededRng::new(5);
        let b: Vec<f64> = (0..40).map(|_| rng.standard_normal()).collect();
        let x = chol.solve(&b).unwrap();
        let r = a.mul_vec(&x).unwrap();
        let err: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 1e-12);
    }

    #[test]
    fn reports_failing_pivot() {
        let mut a = Matrix::identity(4);
        a[(2, 2)] = -1.0;
        match Cholesky::factor(a) {
            Err(Error::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_det_of_diagonal() {
        let chol = Cholesky::factor(Matrix::from_diagonal(&[2.0, 3.0, 4.0])).unwrap();
        assert!((chol.log_det() - 24f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mirror_copies_upper() {
        let mut m = Matrix::zeros(3);
        m[(0, 2)] = 5.0;
        m[(1, 2)] = -1.0;
        m.mirror_upper();
        assert_eq!(m[(2, 0)], 5.0);
        assert_eq!(m[(2, 1)], -1.0);
        assert_eq!(m.max_asymmetry(), 0.0);
    }

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
