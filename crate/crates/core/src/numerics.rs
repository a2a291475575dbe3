//! Small dense real linear algebra.
//!
//! Everything here is sized for the antenna counts of an uplink cell (a
//! handful of rows), so the kernels are plain row-major loops with no
//! blocking. The three entry points used by the games are [`spd_solve`],
//! [`log_det_spd`] and [`dominant_eigenpair`].

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when checking that a matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Pivots at or below this fraction of the largest diagonal entry are rejected.
pub const PIVOT_TOL: f64 = 1e-14;

/// Iteration cap for the dominant eigenpair search.
pub const EIGEN_MAX_ITER: usize = 10_000;

const EIGEN_RESIDUAL_TOL: f64 = 1e-11;
const SQUARE_EVERY: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("eigen iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    /// The `i`-th canonical basis vector of dimension `dim`.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[i] = 1.0;
        v
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

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|x| x * s).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Vector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self.scaled(1.0 / n))
    }

    /// Flips the sign so that the first entry with magnitude above `1e-12`
    /// (relative to the largest entry) is positive.
    pub fn sign_normalized(mut self) -> Vector {
        let peak = self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if let Some(first) = self.0.iter().find(|x| x.abs() > 1e-12 * peak) {
            if *first < 0.0 {
                self.0.iter_mut().for_each(|x| *x = -*x);
            }
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
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

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[r * self.cols..(r + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
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

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from row-major entries, checking shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch {
                expected: format!("{} entries", rows * cols),
                actual: format!("{} entries", data.len()),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    ///
    /// Panics if the rows are ragged; intended for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vector {
        Vector((0..self.rows).map(|r| self[(r, c)]).collect())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimensions differ");
        Vector(
            (0..self.rows)
                .map(|r| self.row(r).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// `selfᵀ v` without forming the transpose.
    pub fn tr_mul_vec(&self, v: &Vector) -> Vector {
        assert_eq!(self.rows, v.dim(), "matrix-vector dimensions differ");
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let s = v[r];
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += s * a;
            }
        }
        Vector(out)
    }

    /// `self += s * x xᵀ`
    pub fn add_outer(&mut self, s: f64, x: &Vector) {
        assert!(self.is_square() && self.rows == x.dim());
        for r in 0..self.rows {
            let sx = s * x[r];
            for c in 0..self.cols {
                self.data[r * self.cols + c] += sx * x[c];
            }
        }
    }

    /// `self += s I`
    pub fn add_identity(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += s;
        }
    }

    pub fn scale_in_place(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst
    }

    /// Replaces the matrix with `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                let m = 0.5 * (self[(r, c)] + self[(c, r)]);
                self[(r, c)] = m;
                self[(c, r)] = m;
            }
        }
    }

    fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(NumericsError::DimensionMismatch {
                expected: "square matrix".into(),
                actual: format!("{}x{}", self.rows, self.cols),
            });
        }
        if self.data.iter().any(|x| !x.is_finite()) {
            return Err(NumericsError::NonFinite);
        }
        let asym = self.asymmetry();
        if asym > SYMMETRY_TOL * self.max_abs() {
            return Err(NumericsError::NotSymmetric { asymmetry: asym });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        a.check_symmetric()?;
        let n = a.rows();
        let peak = (0..n).fold(0.0_f64, |m, i| m.max(a[(i, i)].abs()));
        let floor = PIVOT_TOL * peak;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d.is_nan() || d <= floor {
                return Err(NumericsError::NotPositiveDefinite { row: j, pivot: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        let n = self.dim();
        assert_eq!(b.dim(), n, "right-hand side dimension");
        let l = &self.l;
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        y
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.dim());
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for c in 0..b.cols() {
            let x = self.solve(&b.column(c));
            for r in 0..b.rows() {
                out[(r, c)] = x[r];
            }
        }
        out
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn spd_solve(a: &Matrix, b: &Vector) -> Result<Vector> {
    if b.dim() != a.rows() {
        return Err(NumericsError::DimensionMismatch {
            expected: format!("vector of length {}", a.rows()),
            actual: format!("length {}", b.dim()),
        });
    }
    Ok(Cholesky::new(a)?.solve(b))
}

/// `log det A` from the Cholesky diagonal, so large determinants never overflow.
pub fn log_det_spd(a: &Matrix) -> Result<f64> {
    Ok(Cholesky::new(a)?.log_det())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vector,
}

/// Largest eigenvalue and a unit eigenvector of a symmetric PSD matrix.
///
/// Power iteration on `A + σI` (σ = 1e-12·trace) started from `e₁`, with the
/// iterated operator squared every few steps so that small spectral gaps
/// still close within the iteration cap. A second run from a fixed
/// pseudo-random start catches the case where `e₁` is orthogonal to the
/// dominant eigenspace; the larger Rayleigh quotient wins. The returned
/// vector has its first nonzero entry positive.
pub fn dominant_eigenpair(a: &Matrix) -> Result<EigenPair> {
    a.check_symmetric()?;
    let n = a.rows();
    let scale = a.frobenius_norm();
    if n == 0 {
        return Err(NumericsError::DimensionMismatch {
            expected: "non-empty matrix".into(),
            actual: "0x0".into(),
        });
    }
    if scale == 0.0 {
        return Ok(EigenPair {
            value: 0.0,
            vector: Vector::unit(n, 0),
        });
    }
    let mut shifted = a.clone();
    shifted.add_identity(1e-12 * a.trace().abs());
    shifted.scale_in_place(1.0 / scale);

    let first = power_iterate(a, &shifted, Vector::unit(n, 0), scale)?;
    if n == 1 {
        return Ok(first);
    }
    let second = power_iterate(a, &shifted, auxiliary_start(n), scale)?;
    if second.value > first.value + 1e-12 * scale {
        Ok(second)
    } else {
        Ok(first)
    }
}

fn power_iterate(a: &Matrix, shifted: &Matrix, start: Vector, scale: f64) -> Result<EigenPair> {
    let tol = EIGEN_RESIDUAL_TOL * scale;
    let mut op = shifted.clone();
    let mut v = start.normalized().expect("start vector is nonzero");
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < EIGEN_MAX_ITER {
        for _ in 0..SQUARE_EVERY {
            let w = op.mul_vec(&v);
            match w.normalized() {
                Some(next) => v = next,
                // start lies in the null space of the current operator
                None => return Ok(finish(a, v)),
            }
            iterations += 1;
            let av = a.mul_vec(&v);
            let lambda = v.dot(&av);
            let mut r = av;
            r.axpy(-lambda, &v);
            residual = r.norm();
            if residual <= tol {
                return Ok(finish(a, v));
            }
        }
        let mut sq = op.mul(&op);
        sq.symmetrize();
        let f = sq.frobenius_norm();
        if !(f > 0.0 && f.is_finite()) {
            break;
        }
        sq.scale_in_place(1.0 / f);
        op = sq;
    }
    Err(NumericsError::NoConvergence {
        iterations,
        residual,
    })
}

fn finish(a: &Matrix, v: Vector) -> EigenPair {
    let v = v.normalized().expect("unit vector").sign_normalized();
    let value = v.dot(&a.mul_vec(&v)).max(0.0);
    EigenPair { value, vector: v }
}

/// Fixed start vector from a SplitMix64 sequence.
fn auxiliary_start(n: usize) -> Vector {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    Vector(
        (0..n)
            .map(|_| {
                state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
                let mut z = state;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                z ^= z >> 31;
                // uniform in [0.5, 1.5) with alternating sign
                let u = 0.5 + (z >> 11) as f64 / (1u64 << 53) as f64;
                if z & 1 == 0 {
                    u
                } else {
                    -u
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let x = spd_solve(&Matrix::identity(2), &vec![3.0, 4.0].into()).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 4.0]);
        let x = spd_solve(&Matrix::diag(&[2.0, 4.0]), &vec![2.0, 4.0].into()).unwrap();
        assert!(close(x[0], 1.0, 1e-15) && close(x[1], 1.0, 1e-15));
    }

    #[test]
    fn solve_coupled_two_by_two() {
        // [[2,1],[1,2]]^{-1} = [[2,-1],[-1,2]]/3, applied to (3,3) gives (1,1)
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let x = spd_solve(&a, &vec![3.0, 3.0].into()).unwrap();
        assert!(close(x[0], 1.0, 1e-14) && close(x[1], 1.0, 1e-14));
    }

    #[test]
    fn solve_rejects_indefinite_and_asymmetric() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            spd_solve(&a, &vec![1.0, 1.0].into()),
            Err(NumericsError::NotPositiveDefinite { row: 1, .. })
        ));
        let b = Matrix::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]);
        assert!(matches!(
            spd_solve(&b, &vec![1.0, 1.0].into()),
            Err(NumericsError::NotSymmetric { .. })
        ));
        assert!(matches!(
            log_det_spd(&Matrix::zeros(3, 3)),
            Err(NumericsError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn from_vec_checks() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(NumericsError::NonFinite)
        );
    }

    #[test]
    fn log_det_examples() {
        assert!(close(
            log_det_spd(&Matrix::identity(4)).unwrap(),
            0.0,
            1e-15
        ));
        let e = std::f64::consts::E;
        assert!(close(
            log_det_spd(&Matrix::diag(&[e, e])).unwrap(),
            2.0,
            1e-14
        ));
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!(close(log_det_spd(&a).unwrap(), 3.0_f64.ln(), 1e-14));
    }

    #[test]
    fn eigen_diagonal() {
        let p = dominant_eigenpair(&Matrix::diag(&[3.0, 1.0])).unwrap();
        assert!(close(p.value, 3.0, 1e-12));
        assert!(close(p.vector[0], 1.0, 1e-12) && close(p.vector[1], 0.0, 1e-12));
    }

    #[test]
    fn eigen_start_orthogonal_to_dominant() {
        // e1 is itself an eigenvector here, but not the dominant one
        let p = dominant_eigenpair(&Matrix::diag(&[1.0, 3.0, 2.0])).unwrap();
        assert!(close(p.value, 3.0, 1e-10));
        assert!(close(p.vector[1], 1.0, 1e-9));
    }

    #[test]
    fn eigen_coupled_two_by_two() {
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let p = dominant_eigenpair(&a).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(p.value, 3.0, 1e-10));
        assert!(close(p.vector[0], s, 1e-9) && close(p.vector[1], s, 1e-9));
    }

    #[test]
    fn eigen_degenerate_identity() {
        let a = Matrix::identity(3);
        let p = dominant_eigenpair(&a).unwrap();
        let r = a.mul_vec(&p.vector).sub(&p.vector.scaled(p.value));
        assert!(r.norm() <= 1e-12);
        assert!(p.vector[0] > 0.0);
        assert!(close(p.vector.norm(), 1.0, 1e-12));
    }

    #[test]
    fn eigen_small_gap() {
        let a = Matrix::diag(&[1.0, 0.9999, 0.5, 0.1]);
        let mut rot = Matrix::identity(4);
        let (c, s) = (0.6_f64, 0.8_f64);
        rot[(0, 0)] = c;
        rot[(0, 1)] = -s;
        rot[(1, 0)] = s;
        rot[(1, 1)] = c;
        let mut b = rot.mul(&a).mul(&rot.transpose());
        b.symmetrize();
        let p = dominant_eigenpair(&b).unwrap();
        let r = b.mul_vec(&p.vector).sub(&p.vector.scaled(p.value));
        assert!(r.norm() <= 1e-8 * p.value.max(1.0));
        assert!(close(p.value, 1.0, 1e-9));
    }

    #[test]
    fn eigen_zero_matrix_and_rejects_asymmetric() {
        let p = dominant_eigenpair(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(p.value, 0.0);
        assert!(dominant_eigenpair(&Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 1.0]])).is_err());
    }

    #[test]
    fn sign_normalization() {
        let v = Vector::from(vec![0.0, -0.6, 0.8]).sign_normalized();
        assert_eq!(v.as_slice(), &[0.0, 0.6, -0.8]);
    }
}
