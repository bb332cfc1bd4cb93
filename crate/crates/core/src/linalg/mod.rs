//! Dense real matrices and vectors, plus the handful of factorizations the
//! codec needs: symmetric eigendecomposition, least-squares left inverse,
//! numerical rank and integer rounding with capping.
//!
//! Storage is row-major `f64`. Heavy kernels are delegated to `nalgebra`;
//! conversion happens at the call boundary.

mod io;

pub use io::{
    load_matrix, load_vector, read_csv, read_slmx, save_matrix, save_vector, write_csv,
    write_slmx, SLMX_MAGIC, SLMX_VERSION,
};

use std::fmt;
use std::ops::{Deref, Index, IndexMut};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use thiserror::Error;

/// Relative tolerance used when no explicit rank tolerance is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix must have positive dimensions, got {rows}x{cols}")]
    EmptyShape { rows: usize, cols: usize },
    #[error("entry buffer has {got} values, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigenvalue iteration did not converge")]
    ConvergenceFailure,
    #[error("matrix is rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LinalgError>;

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(LinalgError::NonFinite(i)),
        None => Ok(()),
    }
}

/// A dense real vector with finite entries.
#[derive(Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_finite(&entries)?;
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector difference of dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    /// Componentwise `self + other`.
    pub fn add(&self, other: &Vector) -> Result<Vector> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch(format!(
                "vector sum of dims {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn scale(&self, factor: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * factor).collect())
    }

    pub(crate) fn to_na(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub(crate) fn from_na(v: &DVector<f64>) -> Self {
        Self(v.as_slice().to_vec())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = LinalgError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Vector::new(v)
    }
}

/// A dense row-major matrix with positive dimensions and finite entries.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyShape { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                expected: rows * cols,
                got: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(LinalgError::DimensionMismatch(format!(
                "ragged rows: expected {cols} columns, found {}",
                bad.len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// # Panics
    /// If `n` is zero.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn column_vector(v: &Vector) -> Result<Self> {
        Self::new(v.dim(), 1, v.as_slice().to_vec())
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector((0..self.rows).map(|i| self.data[i * self.cols + j]).collect())
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "product of {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix::from_na(&(self.to_na() * other.to_na())))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest componentwise deviation from the identity; the matrix must be square.
    pub fn max_abs_deviation_from_identity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.data[i * self.cols + j] - target).abs());
            }
        }
        worst
    }

    /// The given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }

    pub fn select_columns(&self, indices: &[usize]) -> Result<Matrix> {
        Matrix::from_fn(self.rows, indices.len(), |i, k| self.data[i * self.cols + indices[k]])
    }

    pub(crate) fn to_na(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    /// Wraps a nalgebra result; entries are trusted to be finite.
    pub(crate) fn from_na(m: &DMatrix<f64>) -> Matrix {
        let (rows, cols) = m.shape();
        Matrix {
            rows,
            cols,
            data: m.transpose().as_slice().to_vec(),
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(i)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

pub fn matvec(a: &Matrix, x: &Vector) -> Result<Vector> {
    if a.cols != x.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} matrix times vector of dim {}",
            a.rows,
            a.cols,
            x.dim()
        )));
    }
    let out = (0..a.rows)
        .map(|i| a.row(i).iter().zip(x.iter()).map(|(p, q)| p * q).sum())
        .collect();
    Ok(Vector(out))
}

/// Eigendecomposition of a symmetric matrix. Eigenvalues come back in
/// ascending order; column `j` of the returned matrix is the unit
/// eigenvector for eigenvalue `j`.
pub fn sym_eigendecomposition(s: &Matrix) -> Result<(Vector, Matrix)> {
    if s.rows != s.cols {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigendecomposition of non-square {}x{} matrix",
            s.rows, s.cols
        )));
    }
    let n = s.rows;
    let scale = s.max_abs().max(f64::MIN_POSITIVE);
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(LinalgError::NotSymmetric(asym / scale));
    }

    let eig = SymmetricEigen::try_new(s.to_na(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(LinalgError::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    check_finite(&values).map_err(|_| LinalgError::ConvergenceFailure)?;
    let vectors = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])])
        .map_err(|_| LinalgError::ConvergenceFailure)?;
    Ok((Vector(values), vectors))
}

/// Singular values in descending order.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let svd = SVD::new(a.to_na(), false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol` times the largest one.
pub fn numerical_rank(a: &Matrix, tol: f64) -> usize {
    let sv = singular_values(a);
    let largest = sv.first().copied().unwrap_or(0.0);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

/// Least-squares left inverse applied to `z`, i.e. `(QᵀQ)⁻¹Qᵀz`, computed
/// through a Householder QR of `q` rather than the normal equations.
pub fn pseudoinverse_apply(q: &Matrix, z: &Vector) -> Result<Vector> {
    if q.rows != z.dim() {
        return Err(LinalgError::DimensionMismatch(format!(
            "{}x{} matrix against vector of dim {}",
            q.rows,
            q.cols,
            z.dim()
        )));
    }
    let rank = numerical_rank(q, DEFAULT_RANK_TOL);
    if rank < q.cols {
        return Err(LinalgError::RankDeficient { rank, cols: q.cols });
    }
    let qr = q.to_na().qr();
    let qtz = qr.q().transpose() * z.to_na();
    let w = qr
        .r()
        .solve_upper_triangular(&qtz)
        .ok_or(LinalgError::RankDeficient { rank, cols: q.cols })?;
    Ok(Vector::from_na(&w))
}

/// Rounds half away from zero, then clamps into `[lo, hi]`.
pub fn round_cap(v: &Vector, lo: f64, hi: f64) -> Vector {
    debug_assert!(lo <= hi);
    Vector(v.iter().map(|x| x.round().max(lo).min(hi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn v(x: &[f64]) -> Vector {
        Vector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(Matrix::new(0, 2, vec![]), Err(LinalgError::EmptyShape { .. })));
        assert!(matches!(Matrix::new(2, 2, vec![1.0; 3]), Err(LinalgError::BadLength { .. })));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(LinalgError::NonFinite(1))
        ));
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn matvec_examples() {
        assert_eq!(matvec(&Matrix::identity(2), &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));
        assert_eq!(
            matvec(&m(&[&[1.0, 2.0], &[3.0, 4.0]]), &v(&[1.0, 1.0])).unwrap(),
            v(&[3.0, 7.0])
        );
        assert_eq!(matvec(&Matrix::zeros(2, 2), &v(&[5.0, -2.0])).unwrap(), v(&[0.0, 0.0]));
        assert!(matches!(
            matvec(&Matrix::zeros(2, 3), &v(&[1.0, 2.0])),
            Err(LinalgError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn matmul_and_transpose() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let p = a.matmul(&a.transpose()).unwrap();
        assert_eq!(p, m(&[&[14.0, 32.0], &[32.0, 77.0]]));
        assert!(a.matmul(&a).is_err());
    }

    fn eigen_residual(s: &Matrix, vals: &Vector, vecs: &Matrix) -> f64 {
        let sv = s.matmul(vecs).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..s.rows() {
            for j in 0..s.cols() {
                worst = worst.max((sv[(i, j)] - vecs[(i, j)] * vals[j]).abs());
            }
        }
        worst
    }

    #[test]
    fn eigen_of_diagonal() {
        let s = m(&[&[2.0, 0.0], &[0.0, 5.0]]);
        let (vals, vecs) = sym_eigendecomposition(&s).unwrap();
        assert_eq!(vals.as_slice(), &[2.0, 5.0]);
        assert!((vecs[(0, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((vecs[(1, 1)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eigen_of_swap_matrix() {
        let s = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let (vals, vecs) = sym_eigendecomposition(&s).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        assert!(eigen_residual(&s, &vals, &vecs) < 1e-12);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((vecs[(0, 0)].abs() - h).abs() < 1e-12);
        // (1,-1)/sqrt2 up to sign
        assert!((vecs[(0, 0)] + vecs[(1, 0)]).abs() < 1e-12);
        assert!((vecs[(0, 1)] - vecs[(1, 1)]).abs() < 1e-12);
    }

    #[test]
    fn eigen_scalar_and_errors() {
        let (vals, vecs) = sym_eigendecomposition(&m(&[&[7.0]])).unwrap();
        assert_eq!(vals.as_slice(), &[7.0]);
        assert_eq!(vecs[(0, 0)].abs(), 1.0);
        assert!(matches!(
            sym_eigendecomposition(&m(&[&[1.0, 2.0], &[3.0, 1.0]])),
            Err(LinalgError::NotSymmetric(_))
        ));
        assert!(sym_eigendecomposition(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn pseudoinverse_examples() {
        let z = v(&[1.5, -2.0, 3.0]);
        let w = pseudoinverse_apply(&Matrix::identity(3), &z).unwrap();
        for i in 0..3 {
            assert!((w[i] - z[i]).abs() < 1e-14);
        }
        // least squares of [1;1] w = (2,4): w = 3
        let w = pseudoinverse_apply(&m(&[&[1.0], &[1.0]]), &v(&[2.0, 4.0])).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-14);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let q = m(&[&[h, 0.0], &[h, 0.0], &[0.0, 1.0]]);
        let z = v(&[1.0, 3.0, -4.0]);
        let w = pseudoinverse_apply(&q, &z).unwrap();
        let qtz = matvec(&q.transpose(), &z).unwrap();
        assert!((w[0] - qtz[0]).abs() < 1e-14 && (w[1] - qtz[1]).abs() < 1e-14);

        assert!(matches!(
            pseudoinverse_apply(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), &v(&[1.0, 1.0])),
            Err(LinalgError::RankDeficient { rank: 1, cols: 2 })
        ));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&Matrix::identity(3), 1e-10), 3);
        assert_eq!(numerical_rank(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), 1e-10), 1);
        assert_eq!(numerical_rank(&Matrix::zeros(3, 2), 1e-10), 0);
    }

    #[test]
    fn round_cap_examples() {
        assert_eq!(round_cap(&v(&[1.7, -0.2, 0.49]), 0.0, 1.0), v(&[1.0, 0.0, 0.0]));
        assert_eq!(round_cap(&v(&[0.5]), 0.0, 1.0), v(&[1.0]));
        assert_eq!(round_cap(&v(&[-0.5]), -3.0, 3.0), v(&[-1.0]));
        let ints = v(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(round_cap(&ints, 0.0, 1.0), ints);
    }

    fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-10.0f64..10.0, r * c)
                .prop_map(move |d| Matrix::new(r, c, d).unwrap())
        })
    }

    fn square_strategy(max_n: usize) -> impl Strategy<Value = Matrix> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(-10.0f64..10.0, n * n).prop_map(move |d| Matrix::new(n, n, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn left_inverse_property(q in matrix_strategy(12, 6), wseed in proptest::collection::vec(-5.0f64..5.0, 6)) {
            prop_assume!(q.rows() >= q.cols());
            prop_assume!(numerical_rank(&q, DEFAULT_RANK_TOL) == q.cols());
            let sv = singular_values(&q);
            // keep the conditioning sane so that 1e-8 is a meaningful bound
            prop_assume!(sv[sv.len() - 1] > 1e-3 * sv[0]);
            let w = Vector::new(wseed[..q.cols()].to_vec()).unwrap();
            let z = matvec(&q, &w).unwrap();
            let back = pseudoinverse_apply(&q, &z).unwrap();
            for i in 0..w.dim() {
                prop_assert!((back[i] - w[i]).abs() <= 1e-8);
            }
            // normal-equation residual contract
            let qt = q.transpose();
            let lhs = matvec(&qt, &matvec(&q, &back).unwrap()).unwrap();
            let rhs = matvec(&qt, &z).unwrap();
            prop_assert!(lhs.sub(&rhs).unwrap().norm2() <= 1e-9 * rhs.norm2().max(1.0));
        }

        #[test]
        fn eigenvectors_orthonormal(a in square_strategy(9)) {
            let s = a.transpose().matmul(&a).unwrap();
            let s = Matrix::from_fn(s.rows(), s.cols(), |i, j| 0.5 * (s[(i, j)] + s[(j, i)])).unwrap();
            let (vals, vecs) = sym_eigendecomposition(&s).unwrap();
            let gram = vecs.transpose().matmul(&vecs).unwrap();
            prop_assert!(gram.max_abs_deviation_from_identity() <= 1e-10);
            prop_assert!(eigen_residual(&s, &vals, &vecs) <= 1e-9 * s.max_abs().max(1.0));
            prop_assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn round_cap_idempotent(x in proptest::collection::vec(-4.0f64..4.0, 1..20)) {
            let v = Vector::new(x).unwrap();
            let once = round_cap(&v, 0.0, 1.0);
            prop_assert_eq!(round_cap(&once, 0.0, 1.0), once);
        }

        #[test]
        fn rank_invariant_under_permutation(a in matrix_strategy(6, 6), seed in 0u64..1000) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut rows: Vec<usize> = (0..a.rows()).collect();
            let mut cols: Vec<usize> = (0..a.cols()).collect();
            rows.shuffle(&mut rng);
            cols.shuffle(&mut rng);
            let p = a.select_rows(&rows).unwrap().select_columns(&cols).unwrap();
            prop_assert_eq!(numerical_rank(&a, 1e-10), numerical_rank(&p, 1e-10));
        }
    }
}
