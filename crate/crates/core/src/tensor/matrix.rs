//! Dense row-major `f64` matrix.
//!
//! Storage is always dense. Matrices that are reused many times as the left
//! operand of a product (normalised adjacencies, bag-of-words features) can
//! build a per-row nonzero index with [`Matrix::index_nonzeros`]; products
//! then walk only the stored column indices. Both paths add terms in the same
//! order, so the results are bit-identical.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{HerbError, Result};

pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    nonzeros: OnceLock<Vec<Vec<u32>>>,
}

impl Clone for Matrix {
    fn clone(&self) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.clone(),
            nonzeros: self.nonzeros.clone(),
        }
    }
}

impl PartialEq for Matrix {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.data == other.data
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        if self.data.len() <= 64 {
            f.debug_list()
                .entries((0..self.rows).map(|i| self.row(i)))
                .finish()
        } else {
            write!(f, "[..]")
        }
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(HerbError::Shape {
                op: "Matrix::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Matrix {
            rows,
            cols,
            data,
            nonzeros: OnceLock::new(),
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
            nonzeros: OnceLock::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Self::filled(1, 1, v)
    }

    pub fn row_vector(values: Vec<f64>) -> Self {
        let cols = values.len();
        Matrix {
            rows: 1,
            cols,
            data: values,
            nonzeros: OnceLock::new(),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix {
            rows,
            cols,
            data,
            nonzeros: OnceLock::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(HerbError::Shape {
                    op: "Matrix::from_rows",
                    left: (i, r.len()),
                    right: (0, cols),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the raw buffer. Drops any nonzero index.
    pub fn data_mut(&mut self) -> &mut [f64] {
        self.nonzeros = OnceLock::new();
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.nonzeros = OnceLock::new();
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        self.nonzeros = OnceLock::new();
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Builds (once) the per-row list of nonzero columns used by products.
    pub fn index_nonzeros(&self) -> &Self {
        self.nonzeros.get_or_init(|| {
            (0..self.rows)
                .map(|i| {
                    self.row(i)
                        .iter()
                        .enumerate()
                        .filter(|(_, v)| **v != 0.0)
                        .map(|(j, _)| j as u32)
                        .collect()
                })
                .collect()
        });
        self
    }

    pub fn with_nonzero_index(self) -> Self {
        self.index_nonzeros();
        self
    }

    fn check_same(&self, other: &Matrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(HerbError::Shape {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(HerbError::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let n = other.cols;
        let mut out = vec![0.0; self.rows * n];
        match self.nonzeros.get() {
            Some(index) => {
                for (i, nz) in index.iter().enumerate() {
                    let orow = &mut out[i * n..(i + 1) * n];
                    let arow = self.row(i);
                    for &k in nz {
                        let a = arow[k as usize];
                        axpy(orow, a, other.row(k as usize));
                    }
                }
            }
            None => {
                for i in 0..self.rows {
                    let orow = &mut out[i * n..(i + 1) * n];
                    for (k, &a) in self.row(i).iter().enumerate() {
                        if a != 0.0 {
                            axpy(orow, a, other.row(k));
                        }
                    }
                }
            }
        }
        Matrix::new(self.rows, n, out)
    }

    /// `selfᵀ · other` without materialising the transpose.
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(HerbError::Shape {
                op: "t_matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let n = other.cols;
        let mut out = vec![0.0; self.cols * n];
        match self.nonzeros.get() {
            Some(index) => {
                for (i, nz) in index.iter().enumerate() {
                    let brow = other.row(i);
                    let arow = self.row(i);
                    for &k in nz {
                        let k = k as usize;
                        axpy(&mut out[k * n..(k + 1) * n], arow[k], brow);
                    }
                }
            }
            None => {
                for i in 0..self.rows {
                    let brow = other.row(i);
                    for (k, &a) in self.row(i).iter().enumerate() {
                        if a != 0.0 {
                            axpy(&mut out[k * n..(k + 1) * n], a, brow);
                        }
                    }
                }
            }
        }
        Matrix::new(self.cols, n, out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(HerbError::Shape {
                op: "matmul_t",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Vec::with_capacity(self.rows * other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.push(dot(a, other.row(j)));
            }
        }
        Matrix::new(self.rows, other.rows, out)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
            nonzeros: OnceLock::new(),
        }
    }

    /// Like [`Matrix::map`] but with a stateful closure, applied in row-major order.
    pub fn map_with(&self, mut f: impl FnMut(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
            nonzeros: OnceLock::new(),
        }
    }

    pub fn zip_map(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        self.check_same(other, "elementwise")?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            nonzeros: OnceLock::new(),
        })
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    /// `self += alpha * other`.
    pub fn add_scaled_in_place(&mut self, other: &Matrix, alpha: f64) -> Result<()> {
        self.check_same(other, "add_scaled_in_place")?;
        self.nonzeros = OnceLock::new();
        axpy(&mut self.data, alpha, &other.data);
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn count_nonzeros(&self) -> usize {
        self.data.iter().filter(|v| **v != 0.0).count()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> Result<f64> {
        self.check_same(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        (0..self.rows).all(|i| (i + 1..self.cols).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Column-wise concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(HerbError::Shape {
                op: "hstack",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Matrix::new(self.rows, cols, data)
    }

    pub fn gather_rows(&self, idx: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(HerbError::precondition(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(idx.len(), self.cols, data)
    }
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, uniform, Stream};

    fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
        Matrix::from_fn(a.rows(), b.cols(), |i, j| {
            let mut s = 0.0;
            for k in 0..a.cols() {
                s += a.get(i, k) * b.get(k, j);
            }
            s
        })
    }

    #[test]
    fn identity_product() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(Matrix::identity(2).matmul(&m).unwrap(), m);
    }

    #[test]
    fn hand_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().data(), &[11.0]);
    }

    #[test]
    fn random_product_matches_triple_loop() {
        let mut rng = seeded(11, Stream::Custom(0));
        let a = uniform(3, 4, -1.0, 1.0, &mut rng);
        let b = uniform(4, 2, -1.0, 1.0, &mut rng);
        let c = a.matmul(&b).unwrap();
        assert!(c.max_abs_diff(&triple_loop(&a, &b)).unwrap() < 1e-12);
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let err = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
    }

    #[test]
    fn indexed_and_plain_products_agree_bitwise() {
        let mut rng = seeded(5, Stream::Custom(1));
        let mut a = uniform(6, 5, -1.0, 1.0, &mut rng);
        for v in a.data_mut().iter_mut().step_by(2) {
            *v = 0.0;
        }
        let b = uniform(5, 3, -1.0, 1.0, &mut rng);
        let g = uniform(6, 3, -1.0, 1.0, &mut rng);
        let plain = a.matmul(&b).unwrap();
        let plain_t = a.t_matmul(&g).unwrap();
        let indexed = a.clone().with_nonzero_index();
        assert_eq!(indexed.matmul(&b).unwrap().data(), plain.data());
        assert_eq!(indexed.t_matmul(&g).unwrap().data(), plain_t.data());
        assert!(plain_t.max_abs_diff(&a.transpose().matmul(&g).unwrap()).unwrap() < 1e-14);
    }

    #[test]
    fn matmul_t_matches_transpose() {
        let mut rng = seeded(5, Stream::Custom(2));
        let a = uniform(3, 4, -1.0, 1.0, &mut rng);
        let b = uniform(5, 4, -1.0, 1.0, &mut rng);
        let c = a.matmul_t(&b).unwrap();
        assert!(c.max_abs_diff(&triple_loop(&a, &b.transpose())).unwrap() < 1e-12);
    }

    #[test]
    fn mutation_drops_index() {
        let mut a = Matrix::identity(3).with_nonzero_index();
        a.set(0, 2, 5.0);
        let b = Matrix::identity(3);
        assert_eq!(a.matmul(&b).unwrap().get(0, 2), 5.0);
    }
}
