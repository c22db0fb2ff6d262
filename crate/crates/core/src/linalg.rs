//! Dense complex matrices with a field tag, vectorization, Kronecker products,
//! the canonical shuffle, numeric rank and Hermitian eigen-decompositions.
//!
//! Storage is always `Complex64`. Under [`Field::Real`] every imaginary part is
//! exactly zero and eigen-decompositions run in real arithmetic so that
//! eigenvectors stay real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Default relative tolerance used throughout the crate.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn parse(s: &str) -> Option<Field> {
        match s.to_ascii_lowercase().as_str() {
            "real" | "r" => Some(Field::Real),
            "complex" | "c" => Some(Field::Complex),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: String, got: String },
    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },
    #[error("nonzero imaginary part {value:.3e} in a real-field matrix")]
    FieldViolation { value: f64 },
}

/// A matrix tagged with its scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    field: Field,
    inner: CMat,
}

impl Mat {
    /// Fails if `field` is real and some entry has a nonzero imaginary part.
    pub fn new(field: Field, inner: CMat) -> Result<Mat, LinalgError> {
        if field == Field::Real {
            if let Some(z) = inner.iter().find(|z| z.im != 0.0) {
                return Err(LinalgError::FieldViolation { value: z.im });
            }
        }
        Ok(Mat { field, inner })
    }

    /// Like [`Mat::new`] but drops imaginary parts under the real field.
    pub fn coerce(field: Field, mut inner: CMat) -> Mat {
        if field == Field::Real {
            inner.iter_mut().for_each(|z| z.im = 0.0);
        }
        Mat { field, inner }
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn inner(&self) -> &CMat {
        &self.inner
    }

    pub fn into_inner(self) -> CMat {
        self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Builds a complex matrix from real row-major data.
pub fn real_mat(rows: usize, cols: usize, data: &[f64]) -> CMat {
    assert_eq!(data.len(), rows * cols);
    CMat::from_fn(rows, cols, |i, j| re(data[i * cols + j]))
}

/// Column-stacking vectorization.
pub fn vec(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for an `rows x cols` matrix.
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> Result<CMat, LinalgError> {
    if v.len() != rows * cols {
        return Err(LinalgError::DimMismatch {
            expected: format!("length {}", rows * cols),
            got: format!("length {}", v.len()),
        });
    }
    Ok(CMat::from_column_slice(rows, cols, v.as_slice()))
}

/// Kronecker product with the block convention `[a_ij * B]`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn hadamard(a: &CMat, b: &CMat) -> Result<CMat, LinalgError> {
    if a.shape() != b.shape() {
        return Err(LinalgError::DimMismatch {
            expected: format!("{:?}", a.shape()),
            got: format!("{:?}", b.shape()),
        });
    }
    Ok(a.component_mul(b))
}

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

/// An index permutation `p`, acting as the matrix with ones at `(p[i], i)`,
/// so that `(P v)[p[i]] = v[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn from_map(map: Vec<usize>) -> Permutation {
        let mut seen = vec![false; map.len()];
        for &t in &map {
            assert!(t < map.len() && !seen[t], "not a permutation");
            seen[t] = true;
        }
        Permutation { map }
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation { map: (0..n).collect() }
    }

    /// The transposition of `a` and `b` on `0..n`.
    pub fn swap(n: usize, a: usize, b: usize) -> Permutation {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(a, b);
        Permutation { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &t) in self.map.iter().enumerate() {
            inv[t] = i;
        }
        Permutation { map: inv }
    }

    /// `P ⊗ Q` as an index permutation on `0..len(P)*len(Q)`.
    pub fn kron(&self, other: &Permutation) -> Permutation {
        let m = other.len();
        let mut map = vec![0; self.len() * m];
        for a in 0..self.len() {
            for b in 0..m {
                map[a * m + b] = self.map[a] * m + other.map[b];
            }
        }
        Permutation { map }
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.len();
        let mut p = CMat::zeros(n, n);
        for (i, &t) in self.map.iter().enumerate() {
            p[(t, i)] = re(1.0);
        }
        p
    }

    /// `P * m`.
    pub fn apply_rows(&self, m: &CMat) -> CMat {
        assert_eq!(m.nrows(), self.len());
        let mut out = CMat::zeros(m.nrows(), m.ncols());
        for (i, &t) in self.map.iter().enumerate() {
            out.set_row(t, &m.row(i));
        }
        out
    }

    /// `m * P`.
    pub fn apply_cols(&self, m: &CMat) -> CMat {
        assert_eq!(m.ncols(), self.len());
        let mut out = CMat::zeros(m.nrows(), m.ncols());
        for (i, &t) in self.map.iter().enumerate() {
            out.set_column(i, &m.column(t));
        }
        out
    }
}

/// The canonical shuffle on `F^n ⊗ F^n`, sending `z ⊗ x` to `x ⊗ z`.
/// It is symmetric and an involution.
pub fn canonical_shuffle(n: usize) -> Permutation {
    let mut map = vec![0; n * n];
    for a in 0..n {
        for b in 0..n {
            map[a * n + b] = b * n + a;
        }
    }
    Permutation { map }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_vec(v: &CVec) -> f64 {
    v.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Singular triplets `(σ, u, v)` with `M v = σ u`, largest first, taken from
/// the Hermitian eigenproblem of `[[0, M], [M*, 0]]` whose eigenvalues are
/// `±σ`. nalgebra's bidiagonal SVD returns wrong singular values on some
/// rank-deficient inputs, so everything goes through [`hermitian_eigen`].
pub fn singular_triplets(m: &CMat) -> Vec<(f64, CVec, CVec)> {
    let (r, c) = (m.nrows(), m.ncols());
    let k = r.min(c);
    if k == 0 {
        return Vec::new();
    }
    let mut j = CMat::zeros(r + c, r + c);
    j.view_mut((0, r), (r, c)).copy_from(m);
    j.view_mut((r, 0), (c, r)).copy_from(&m.adjoint());
    let (vals, vecs) = hermitian_eigen(&j, Field::Complex);
    let s2 = std::f64::consts::SQRT_2;
    (0..k)
        .map(|t| {
            let idx = r + c - 1 - t;
            let w = vecs.column(idx);
            let u: CVec = w.rows(0, r).into_owned() * re(s2);
            let v: CVec = w.rows(r, c).into_owned() * re(s2);
            (vals[idx].max(0.0), u, v)
        })
        .collect()
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    singular_triplets(m).into_iter().map(|t| t.0).collect()
}

/// Default rank tolerance for an `r x c` matrix.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    DEFAULT_TOL * rows.max(cols) as f64
}

/// Number of singular values above `tol * sigma_max`.
pub fn numeric_rank(m: &CMat, tol: f64) -> usize {
    let s = singular_values(m);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > tol * smax).count(),
        _ => 0,
    }
}

/// Moore-Penrose pseudo-inverse with relative cutoff `tol * sigma_max`.
pub fn pinv(m: &CMat, tol: f64) -> CMat {
    let trip = singular_triplets(m);
    let smax = trip.first().map_or(0.0, |t| t.0);
    let cut = tol * smax;
    let mut out = CMat::zeros(m.ncols(), m.nrows());
    for (s, u, v) in trip {
        if s > cut && s > 0.0 {
            out += (v * u.adjoint()) * re(1.0 / s);
        }
    }
    out
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `tol` scaled by `max(1, max|m_ij|)`.
pub fn scaled_tol(m: &CMat, tol: f64) -> f64 {
    tol * max_abs(m).max(1.0)
}

pub fn check_hermitian(m: &CMat, tol: f64) -> Result<(), LinalgError> {
    let dev = hermitian_deviation(m);
    if dev > scaled_tol(m, tol) {
        return Err(LinalgError::NotHermitian { deviation: dev });
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in ascending
/// order. The input is symmetrized first; under the real field the real part
/// is decomposed in real arithmetic. nalgebra's symmetric eigensolver returns
/// inaccurate eigenvectors for clustered eigenvalues, so this goes through faer.
pub fn hermitian_eigen(m: &CMat, field: Field) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    match field {
        Field::Real => {
            let a = faer::Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (m[(i, j)].re + m[(j, i)].re));
            let eig = a.selfadjoint_eigendecomposition(faer::Side::Lower);
            let (s, u) = (eig.s().column_vector(), eig.u());
            ((0..n).map(|k| s[k]).collect(), CMat::from_fn(n, n, |i, k| re(u[(i, k)])))
        }
        Field::Complex => {
            let a = faer::Mat::<faer::complex_native::c64>::from_fn(n, n, |i, j| {
                let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                faer::complex_native::c64::new(v.re, v.im)
            });
            let eig = a.selfadjoint_eigendecomposition(faer::Side::Lower);
            let (s, u) = (eig.s().column_vector(), eig.u());
            let vals = (0..n).map(|k| s[k].re).collect();
            (vals, CMat::from_fn(n, n, |i, k| c(u[(i, k)].re, u[(i, k)].im)))
        }
    }
}

/// Smallest eigenvalue of a Hermitian matrix and a unit eigenvector for it.
pub fn min_eigenvalue_hermitian(m: &CMat, field: Field, tol: f64) -> Result<(f64, CVec), LinalgError> {
    check_hermitian(m, tol)?;
    if m.nrows() == 0 {
        return Ok((0.0, CVec::zeros(0)));
    }
    let (vals, vecs) = hermitian_eigen(m, field);
    Ok((vals[0], vecs.column(0).into_owned()))
}

/// `I_k ⊗ v` for a column vector `v`.
pub fn kron_identity_vec(k: usize, v: &CVec) -> CMat {
    let n = v.len();
    let mut out = CMat::zeros(k * n, k);
    for j in 0..k {
        for i in 0..n {
            out[(j * n + i, j)] = v[i];
        }
    }
    out
}

/// `v ⊗ I_k` for a column vector `v`.
pub fn kron_vec_identity(v: &CVec, k: usize) -> CMat {
    let q = v.len();
    let mut out = CMat::zeros(q * k, k);
    for j in 0..q {
        for i in 0..k {
            out[(j * k + i, i)] = v[j];
        }
    }
    out
}

/// `z ⊗ x` for column vectors.
pub fn kron_vec(z: &CVec, x: &CVec) -> CVec {
    let n = x.len();
    CVec::from_fn(z.len() * n, |p, _| z[p / n] * x[p % n])
}

pub fn norm2(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_matches_column_stacking() {
        let m = real_mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let v = vec(&m);
        let expected = [1.0, 4.0, 2.0, 5.0, 3.0, 6.0];
        for (a, b) in v.iter().zip(expected) {
            assert_eq!(a.re, b);
        }
        assert_eq!(unvec(&v, 2, 3).unwrap(), m);
        assert!(unvec(&v, 4, 2).is_err());
    }

    #[test]
    fn unit_matrix_vectorizes_to_kron_of_units() {
        // vec(E_lk) for an m x n unit matrix sits at index k*m + l (0-based).
        let (m, n) = (3, 2);
        for l in 0..m {
            for k in 0..n {
                let mut e = CMat::zeros(m, n);
                e[(l, k)] = re(1.0);
                let v = vec(&e);
                let pos = v.iter().position(|z| z.re == 1.0).unwrap();
                assert_eq!(pos, k * m + l);
            }
        }
    }

    #[test]
    fn shuffle_swaps_tensor_factors() {
        let n = 3;
        let z = CVec::from_fn(n, |i, _| c(i as f64 + 1.0, 0.5));
        let x = CVec::from_fn(n, |i, _| c(-(i as f64), 2.0));
        let s = canonical_shuffle(n);
        let zx = kron_vec(&z, &x);
        let xz = kron_vec(&x, &z);
        let moved = s.apply_rows(&CMat::from_column_slice(n * n, 1, zx.as_slice()));
        assert_eq!(moved.column(0).into_owned(), xz);
        let d = s.to_dense();
        assert_eq!(d, d.transpose());
        assert_eq!(&d * &d, CMat::identity(n * n, n * n));
    }

    #[test]
    fn permutation_actions_match_dense() {
        let p = Permutation::from_map(vec![2, 0, 3, 1]);
        let m = CMat::from_fn(4, 4, |i, j| c(i as f64, j as f64));
        assert_eq!(p.apply_rows(&m), p.to_dense() * &m);
        assert_eq!(p.apply_cols(&m), &m * p.to_dense());
        let q = Permutation::swap(3, 0, 2);
        assert_eq!(p.kron(&q).to_dense(), kron(&p.to_dense(), &q.to_dense()));
    }

    #[test]
    fn rank_and_eigen() {
        let m = real_mat(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
        assert_eq!(numeric_rank(&m, 1e-9), 2);
        let h = real_mat(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let (l, v) = min_eigenvalue_hermitian(&h, Field::Real, 1e-9).unwrap();
        assert!((l + 1.0).abs() < 1e-12);
        assert!(v.iter().all(|z| z.im == 0.0));
        let bad = real_mat(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            min_eigenvalue_hermitian(&bad, Field::Real, 1e-9),
            Err(LinalgError::NotHermitian { .. })
        ));
    }

    #[test]
    fn real_field_rejects_imaginary_entries() {
        let m = CMat::from_element(1, 1, c(0.0, 1.0));
        assert!(Mat::new(Field::Real, m.clone()).is_err());
        assert!(Mat::new(Field::Complex, m).is_ok());
    }

    #[test]
    fn pinv_inverts_full_rank() {
        let m = CMat::from_fn(3, 2, |i, j| c((i + 2 * j) as f64, (i * j) as f64 - 1.0));
        let p = pinv(&m, 1e-12);
        let id = &p * &m;
        assert!((id - CMat::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn pinv_on_rank_deficient_symmetric() {
        // Rank 3; nalgebra's SVD misreports the leading singular value here.
        let d = [
            1.054226191634541, 0.33717918852193485, -0.3174898191397167, -0.5747065970385777,
            0.33717918852193485, 1.2862588032563627, 0.2351217944159619, 0.20370058812517666,
            -0.3174898191397167, 0.2351217944159619, 0.8121994309277618, -0.25388777108712657,
            -0.5747065970385777, 0.20370058812517666, -0.25388777108712657, 0.9067099977327765,
        ];
        let m = real_mat(4, 4, &d);
        let s = singular_values(&m);
        assert!((s[0] - 1.6234792170098382).abs() < 1e-12);
        assert_eq!(numeric_rank(&m, DEFAULT_TOL), 3);
        let p = pinv(&m, default_rank_tol(4, 4));
        assert!(max_abs(&(&m * &p * &m - &m)) < 1e-12);
        assert!(max_abs(&(&p * &m * &p - &p)) < 1e-12);
    }

    #[test]
    fn pinv_of_complex_permutation() {
        // Every singular value is 1; nalgebra's eigensolver loses one
        // eigenvector of the doubled matrix in this cluster.
        let m = real_mat(4, 4, &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.]);
        let p = pinv(&m, default_rank_tol(4, 4));
        assert!(max_abs(&(&p * &m - CMat::identity(4, 4))) < 1e-12);
        let (vals, vecs) = hermitian_eigen(&m, Field::Complex);
        for k in 0..4 {
            let v = vecs.column(k).into_owned();
            assert!(norm2(&(&m * &v - &v * re(vals[k]))) < 1e-12);
        }
    }
}
