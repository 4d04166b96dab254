//! Dense row-major f64 matrix: storage, products, reductions, softmax,
//! Glorot initialization. Everything the layers need, nothing more.
//!
//! All statistics are population statistics (divide by the count, not
//! count − 1). Accumulation order in products is fixed (ascending inner
//! index) so results are bit-reproducible across runs and platforms.

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        m.data.fill(value);
        m
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::shape("from_vec", (rows, cols), (data.len(), 1)));
        }
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let r = rows.len();
        assert!(r > 0, "matrix dimensions must be positive");
        let c = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::shape("from_rows", (i, row.len()), (0, c)));
            }
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Matrix::from_vec(r, c, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Entries uniform in ±sqrt(6 / (rows + cols)).
    pub fn glorot_uniform(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Matrix::from_fn(rows, cols, |_, _| rng.uniform(-limit, limit))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Standard product. Each output entry accumulates over the inner index
    /// in ascending order, identical to the naive triple loop.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::shape("matmul", self.shape(), rhs.shape()));
        }
        let n = rhs.cols;
        let mut out = vec![0.0; self.rows * n];
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out[i * n..(i + 1) * n];
            for (k, &aik) in a_row.iter().enumerate() {
                let b_row = &rhs.data[k * n..(k + 1) * n];
                for j in 0..n {
                    out_row[j] += aik * b_row[j];
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: n,
            data: out,
        })
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return Err(Error::shape("matvec", self.shape(), (v.len(), 1)));
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect())
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape("zip_map", self.shape(), rhs.shape()));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_map(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_map(rhs, |a, b| a - b)
    }

    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_map(rhs, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|x| s * x)
    }

    pub fn add_assign(&mut self, rhs: &Matrix) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape("add_assign", self.shape(), rhs.shape()));
        }
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    /// Frobenius inner product.
    pub fn frob_dot(&self, rhs: &Matrix) -> Result<f64> {
        if self.shape() != rhs.shape() {
            return Err(Error::shape("frob_dot", self.shape(), rhs.shape()));
        }
        Ok(dot(&self.data, &rhs.data))
    }

    pub fn row_mean(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().sum::<f64>() / self.cols as f64)
            .collect()
    }

    /// Population standard deviation of each row (divide by T, not T − 1).
    pub fn row_std(&self) -> Vec<f64> {
        let means = self.row_mean();
        (0..self.rows)
            .map(|i| {
                let m = means[i];
                let ss: f64 = self.row(i).iter().map(|&x| (x - m) * (x - m)).sum();
                (ss / self.cols as f64).sqrt()
            })
            .collect()
    }

    pub fn col_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, &x) in self.row(i).iter().enumerate() {
                out[j] += x;
            }
        }
        for v in &mut out {
            *v /= self.rows as f64;
        }
        out
    }

    /// Population standard deviation of each column (divide by D).
    pub fn col_std(&self) -> Vec<f64> {
        let means = self.col_mean();
        let mut ss = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, &x) in self.row(i).iter().enumerate() {
                let d = x - means[j];
                ss[j] += d * d;
            }
        }
        ss.iter()
            .map(|&s| (s / self.rows as f64).sqrt())
            .collect()
    }

    /// Row-wise softmax with per-row max subtraction for stability.
    pub fn row_softmax(&self) -> Matrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = out.row_mut(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Outer product u vᵀ.
pub fn outer(u: &[f64], v: &[f64]) -> Matrix {
    Matrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]])
            .unwrap();
        let i3 = Matrix::identity(3);
        assert_eq!(i3.matmul(&m).unwrap(), m);
    }

    #[test]
    fn matmul_hand_oracle() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let y = a.matmul(&b).unwrap();
        assert_eq!(y.data(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_error_names_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3"), "{err}");
    }

    /// Naive triple-loop oracle with the same ascending-k accumulation.
    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for k in 0..a.cols() {
                    acc += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn triple_product_matches_naive_oracle_exactly() {
        let mut rng = Rng::new(11);
        for _ in 0..5 {
            let a = Matrix::from_fn(4, 6, |_, _| rng.uniform(-2.0, 2.0));
            let b = Matrix::from_fn(6, 3, |_, _| rng.uniform(-2.0, 2.0));
            let c = Matrix::from_fn(3, 5, |_, _| rng.uniform(-2.0, 2.0));
            let fast = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let slow = naive_matmul(&naive_matmul(&a, &b), &c);
            assert_eq!(fast, slow, "accumulation order must match bit-exactly");
        }
    }

    #[test]
    fn softmax_symmetry_and_overflow_guard() {
        let m = Matrix::from_rows(&[vec![0.0, 0.0, 0.0]]).unwrap();
        let s = m.row_softmax();
        for &x in s.data() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let big = Matrix::from_rows(&[vec![1000.0, 1000.0]]).unwrap();
        let s = big.row_softmax();
        assert!((s.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_closed_form() {
        let m = Matrix::from_rows(&[vec![0.0, 3.0f64.ln()]]).unwrap();
        let s = m.row_softmax();
        assert!((s.get(0, 0) - 0.25).abs() < 1e-12);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn row_statistics() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(m.row_mean(), vec![2.0]);
        let std = m.row_std()[0];
        assert!((std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn col_std_constant_column_is_zero() {
        let m = Matrix::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]]).unwrap();
        let s = m.col_std();
        assert_eq!(s[0], 0.0);
        assert!(s[1] > 0.0);
    }

    #[test]
    fn row_std_squared_matches_sum_of_squared_deviations() {
        let mut rng = Rng::new(5);
        let m = Matrix::from_fn(6, 9, |_, _| rng.uniform(-4.0, 4.0));
        let means = m.row_mean();
        for (i, &s) in m.row_std().iter().enumerate() {
            let ss: f64 = m.row(i).iter().map(|&x| (x - means[i]).powi(2)).sum();
            let lhs = s * s * m.cols() as f64;
            assert!((lhs - ss).abs() <= 1e-10 * ss.abs().max(1.0));
        }
    }

    #[test]
    fn glorot_deterministic_and_bounded() {
        let a = Matrix::glorot_uniform(&mut Rng::new(9), 7, 5);
        let b = Matrix::glorot_uniform(&mut Rng::new(9), 7, 5);
        assert_eq!(a, b);

        let one = Matrix::glorot_uniform(&mut Rng::new(1), 1, 1);
        let bound = 3.0f64.sqrt();
        assert!(one.get(0, 0).abs() <= bound);
    }

    #[test]
    fn glorot_empirical_mean_near_zero() {
        // Mean of n draws from U(-a, a) is within 3a/sqrt(3n) of 0 w.h.p.
        let n = 100_000usize;
        let mut rng = Rng::new(1234);
        let m = Matrix::glorot_uniform(&mut rng, 100, 1000);
        let a = (6.0 / 1100.0f64).sqrt();
        let mean = m.data().iter().sum::<f64>() / n as f64;
        let sigma = a / 3.0f64.sqrt();
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean={mean}");
    }

    #[test]
    fn transpose_and_outer() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.transpose().data(), &[1.0, 3.0, 2.0, 4.0]);
        let o = outer(&[1.0, 2.0], &[3.0, 4.0, 5.0]);
        assert_eq!(o.row(1), &[6.0, 8.0, 10.0]);
    }
}
