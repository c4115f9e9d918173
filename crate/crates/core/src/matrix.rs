//! Dense row-major `f64` matrices and the kernels the solver is built on.
//!
//! Every constructor rejects NaN/Inf, and every kernel re-checks its output, so a
//! [`DenseMatrix`] in hand is always finite.

use crate::error::{Dims, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(rows, cols)?;
        if data.len() != dims.len() {
            return Err(Error::Parameter(format!(
                "{} values supplied for a {dims} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Parameter(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Dims::new(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::from_vec(rows, cols, data)
    }

    pub fn filled(dims: Dims, value: f64) -> Result<Self> {
        Self::from_vec(dims.rows, dims.cols, vec![value; dims.len()])
    }

    pub fn zeros(dims: Dims) -> Self {
        Self::raw(dims.rows, dims.cols, vec![0.0; dims.len()])
    }

    pub fn ones(dims: Dims) -> Self {
        Self::raw(dims.rows, dims.cols, vec![1.0; dims.len()])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(Dims { rows: n, cols: n });
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Internal constructor for data already known to be finite and well-sized.
    pub(crate) fn raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// Wraps kernel output, failing if floating-point overflow produced a non-finite entry.
    pub(crate) fn checked(op: &'static str, rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op });
        }
        Ok(Self::raw(rows, cols, data))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> Dims {
        Dims {
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds for {}", self.dims());
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn same_dims(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(op, self.dims(), other.dims()));
        }
        Ok(())
    }

    /// Standard matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::shape("matmul", self.dims(), rhs.dims()));
        }
        let (m, k, n) = (self.rows, self.cols, rhs.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in self.row(i).iter().enumerate().take(k) {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(p)) {
                    *o += a * b;
                }
            }
        }
        Self::checked("matmul", m, n, out)
    }

    /// `self * rhs^T` without materializing the transpose.
    pub fn matmul_transpose(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.cols {
            return Err(Error::shape("matmul_transpose", self.dims(), rhs.dims()));
        }
        let (m, n) = (self.rows, rhs.rows);
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a = self.row(i);
            for j in 0..n {
                out.push(dot(a, rhs.row(j)));
            }
        }
        Self::checked("matmul_transpose", m, n, out)
    }

    /// `self^T * rhs` without materializing the transpose.
    pub fn transpose_matmul(&self, rhs: &Self) -> Result<Self> {
        if self.rows != rhs.rows {
            return Err(Error::shape("transpose_matmul", self.dims(), rhs.dims()));
        }
        let (m, n) = (self.cols, rhs.cols);
        let mut out = vec![0.0; m * n];
        for p in 0..self.rows {
            let b = rhs.row(p);
            for (i, &a) in self.row(p).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(b) {
                    *o += a * bv;
                }
            }
        }
        Self::checked("transpose_matmul", m, n, out)
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, rhs: &Self) -> Result<Self> {
        self.zip_map(rhs, "hadamard", |a, b| a * b)
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_map(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_map(rhs, "sub", |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map("scale", |v| v * c)
    }

    /// Applies `f` entrywise; the result must stay finite.
    pub fn map(&self, op: &'static str, f: impl Fn(f64) -> f64) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::checked(op, self.rows, self.cols, data)
    }

    /// Combines two equally-shaped matrices entrywise.
    pub fn zip_map(&self, rhs: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_dims(rhs, op)?;
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Self::checked(op, self.rows, self.cols, data)
    }

    pub fn transpose(&self) -> Self {
        let (m, n) = (self.rows, self.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Self::raw(n, m, out)
    }

    /// Sum of squared entries.
    ///
    /// Entries are accumulated in mirrored pairs `(i, j)`/`(j, i)`, so the result
    /// is bit-identical for a matrix and its transpose.
    pub fn frob_norm_sq(&self) -> f64 {
        let sq = |i: usize, j: usize| {
            if i < self.rows && j < self.cols {
                let v = self.data[i * self.cols + j];
                v * v
            } else {
                0.0
            }
        };
        let n = self.rows.max(self.cols);
        let mut total = 0.0;
        for i in 0..n {
            total += sq(i, i);
            for j in i + 1..n {
                total += sq(i, j) + sq(j, i);
            }
        }
        total
    }

    pub fn frob_norm(&self) -> f64 {
        self.frob_norm_sq().sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// `||self - rhs||_F^2` without allocating the difference.
    pub fn dist_sq(&self, rhs: &Self) -> Result<f64> {
        self.same_dims(rhs, "dist_sq")?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        self.same_dims(rhs, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&rhs.data)
            .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs())))
    }

    /// Column `j` as a vector. Used to orthonormalize thin factors.
    pub(crate) fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub(crate) fn set_col(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Only the lower triangle of the input is read.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::shape("cholesky", a.dims(), a.dims().transposed()));
        }
        let n = a.rows;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = a.data[j * n + j];
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            // Also rejects NaN pivots.
            if diag.is_nan() || diag <= 0.0 {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = diag.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = a.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    /// Solves `A X = B` for every column of `B` at once, sweeping whole rows.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n;
        if b.rows != n {
            return Err(Error::shape("spd_solve", Dims { rows: n, cols: n }, b.dims()));
        }
        let w = b.cols;
        let mut x = b.data.clone();
        // Forward: L Z = B.
        for i in 0..n {
            for k in 0..i {
                let lik = self.l[i * n + k];
                if lik == 0.0 {
                    continue;
                }
                let (done, rest) = x.split_at_mut(i * w);
                for (xi, &xk) in rest[..w].iter_mut().zip(&done[k * w..(k + 1) * w]) {
                    *xi -= lik * xk;
                }
            }
            let d = self.l[i * n + i];
            x[i * w..(i + 1) * w].iter_mut().for_each(|v| *v /= d);
        }
        // Backward: L^T X = Z.
        for i in (0..n).rev() {
            for k in i + 1..n {
                let lki = self.l[k * n + i];
                if lki == 0.0 {
                    continue;
                }
                let (head, tail) = x.split_at_mut(k * w);
                for (xi, &xk) in head[i * w..(i + 1) * w].iter_mut().zip(&tail[..w]) {
                    *xi -= lki * xk;
                }
            }
            let d = self.l[i * n + i];
            x[i * w..(i + 1) * w].iter_mut().for_each(|v| *v /= d);
        }
        DenseMatrix::checked("spd_solve", n, w, x)
    }
}

/// Solves `a X = b` for symmetric positive definite `a` via Cholesky.
pub fn spd_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Cholesky::factor(a)?.solve(b)
}

impl Dims {
    pub fn transposed(&self) -> Dims {
        Dims {
            rows: self.cols,
            cols: self.rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    fn rel_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
        a.dist_sq(b).unwrap().sqrt() / (1.0 + b.frob_norm())
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(DenseMatrix::from_vec(0, 3, vec![]).is_err());
        assert!(DenseMatrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::Domain(_))
        ));
        assert!(DenseMatrix::from_vec(1, 1, vec![f64::INFINITY]).is_err());
        assert!(DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn matmul_examples() {
        let b = m(&[&[1.5, -2.0], &[0.25, 7.0]]);
        assert_eq!(DenseMatrix::identity(2).matmul(&b).unwrap(), b);

        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let ones = m(&[&[1.0], &[1.0]]);
        assert_eq!(a.matmul(&ones).unwrap(), m(&[&[3.0], &[7.0]]));

        let x = DenseMatrix::ones(Dims { rows: 2, cols: 3 });
        let err = x.matmul(&x).unwrap_err();
        assert!(err.to_string().contains("2x3"), "{err}");
    }

    #[test]
    fn matmul_overflow_is_reported() {
        let a = m(&[&[1e200]]);
        assert!(matches!(a.matmul(&a), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn fused_products_match_explicit_transpose() {
        let a = DenseMatrix::from_fn(4, 3, |i, j| (i as f64) - 0.5 * j as f64).unwrap();
        let b = DenseMatrix::from_fn(5, 3, |i, j| (i * j) as f64 + 1.0).unwrap();
        assert_eq!(a.matmul_transpose(&b).unwrap(), a.matmul(&b.transpose()).unwrap());
        let c = DenseMatrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64).unwrap();
        assert_eq!(a.transpose_matmul(&c).unwrap(), a.transpose().matmul(&c).unwrap());
        assert!(a.matmul_transpose(&c).is_err());
        assert!(a.transpose_matmul(&b).is_err());
    }

    #[test]
    fn hadamard_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let ones = DenseMatrix::ones(a.dims());
        assert_eq!(a.hadamard(&ones).unwrap(), a);
        let mask = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(a.hadamard(&mask).unwrap(), m(&[&[0.0, 2.0], &[3.0, 0.0]]));
        let zeros = DenseMatrix::zeros(a.dims());
        assert_eq!(a.hadamard(&zeros).unwrap(), zeros);
        assert!(a.hadamard(&m(&[&[1.0, 2.0]])).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(DenseMatrix::zeros(Dims { rows: 3, cols: 2 }).frob_norm_sq(), 0.0);
        assert_eq!(m(&[&[3.0, 4.0]]).frob_norm_sq(), 25.0);
        assert_eq!(DenseMatrix::zeros(Dims { rows: 2, cols: 2 }).max_abs(), 0.0);
        assert_eq!(m(&[&[1.0, -5.0], &[2.0, 0.0]]).max_abs(), 5.0);
        assert_eq!(m(&[&[-2.5]]).max_abs(), 2.5);
    }

    #[test]
    fn transpose_examples() {
        assert_eq!(m(&[&[1.0, 2.0, 3.0]]).transpose(), m(&[&[1.0], &[2.0], &[3.0]]));
        let s = m(&[&[1.0, 2.0], &[2.0, 5.0]]);
        assert_eq!(s.transpose(), s);
    }

    #[test]
    fn spd_solve_examples() {
        let b = m(&[&[1.0, -2.0, 3.5], &[0.5, 4.0, -1.0]]);
        assert_eq!(spd_solve(&DenseMatrix::identity(2), &b).unwrap(), b);

        let a = m(&[&[4.0, 0.0], &[0.0, 9.0]]);
        let rhs = m(&[&[8.0], &[27.0]]);
        assert_eq!(spd_solve(&a, &rhs).unwrap(), m(&[&[2.0], &[3.0]]));
    }

    #[test]
    fn spd_solve_reports_failing_pivot() {
        let a = m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, -1.0]]);
        let b = DenseMatrix::ones(Dims { rows: 3, cols: 1 });
        assert!(matches!(spd_solve(&a, &b), Err(Error::NotPositiveDefinite { pivot: 2 })));
        // Rank-deficient: second pivot is exactly zero.
        let a = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            spd_solve(&a, &DenseMatrix::ones(Dims { rows: 2, cols: 1 })),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
        assert!(spd_solve(&m(&[&[1.0, 2.0]]), &m(&[&[1.0]])).is_err());
        assert!(spd_solve(&DenseMatrix::identity(2), &m(&[&[1.0]])).is_err());
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
        proptest::collection::vec(-10.0f64..10.0, rows * cols)
            .prop_map(move |d| DenseMatrix::from_vec(rows, cols, d).unwrap())
    }

    fn dims() -> impl Strategy<Value = (usize, usize)> {
        (1usize..7, 1usize..7)
    }

    proptest! {
        #[test]
        fn matmul_is_associative(
            (a, b, c) in (1usize..6, 1usize..6, 1usize..6, 1usize..6)
                .prop_flat_map(|(p, q, r, s)| (matrix(p, q), matrix(q, r), matrix(r, s)))
        ) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            prop_assert!(left.dist_sq(&right).unwrap().sqrt() <= 1e-9 * (1.0 + left.frob_norm()));
        }

        #[test]
        fn hadamard_commutes_and_is_bilinear(
            (a, b, c, k) in dims().prop_flat_map(|(r, c)| (matrix(r, c), matrix(r, c), matrix(r, c), -3.0f64..3.0))
        ) {
            prop_assert_eq!(a.hadamard(&b).unwrap(), b.hadamard(&a).unwrap());
            let lhs = a.add(&b).unwrap().hadamard(&c).unwrap();
            let rhs = a.hadamard(&c).unwrap().add(&b.hadamard(&c).unwrap()).unwrap();
            prop_assert!(rel_err(&lhs, &rhs) <= 1e-12);
            let lhs = a.scale(k).unwrap().hadamard(&b).unwrap();
            let rhs = a.hadamard(&b).unwrap().scale(k).unwrap();
            prop_assert!(rel_err(&lhs, &rhs) <= 1e-12);
        }

        #[test]
        fn frob_norm_is_transpose_invariant_and_homogeneous(
            (a, c) in dims().prop_flat_map(|(r, c)| (matrix(r, c), -4.0f64..4.0))
        ) {
            prop_assert_eq!(a.frob_norm_sq(), a.transpose().frob_norm_sq());
            prop_assert_eq!(a.transpose().transpose(), a.clone());
            let scaled = a.scale(c).unwrap().frob_norm_sq();
            prop_assert!((scaled - c * c * a.frob_norm_sq()).abs() <= 1e-12 * (1.0 + scaled));
        }

        #[test]
        fn spd_solve_residual_is_small(
            (mm, b) in (1usize..40, 1usize..5).prop_flat_map(|(n, w)| (matrix(n, n), matrix(n, w)))
        ) {
            let a = mm.transpose_matmul(&mm).unwrap().add(&DenseMatrix::identity(mm.rows())).unwrap();
            let x = spd_solve(&a, &b).unwrap();
            let resid = a.matmul(&x).unwrap().dist_sq(&b).unwrap().sqrt();
            prop_assert!(resid <= 1e-10 * (1.0 + b.frob_norm()), "residual {resid}");
        }
    }

    #[test]
    fn spd_solve_residual_at_size_64() {
        let mm = DenseMatrix::from_fn(64, 64, |i, j| ((i * 31 + j * 17) % 23) as f64 / 7.0 - 1.5).unwrap();
        let a = mm.transpose_matmul(&mm).unwrap().add(&DenseMatrix::identity(64)).unwrap();
        let b = DenseMatrix::from_fn(64, 3, |i, j| (i as f64).sin() + j as f64).unwrap();
        let x = spd_solve(&a, &b).unwrap();
        let resid = a.matmul(&x).unwrap().dist_sq(&b).unwrap().sqrt();
        assert!(resid <= 1e-10 * (1.0 + b.frob_norm()), "residual {resid}");
    }
}
