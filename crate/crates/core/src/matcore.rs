//! Dense complex matrices and the handful of spectral primitives the rest of
//! the crate is built on.
//!
//! Everything here is a pure function of immutable values. Storage is dense
//! (`nalgebra::DMatrix<Complex64>`); system dimensions are capped at
//! [`MAX_DIM`] by the validating constructors of the higher-level types.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Max entry magnitude of `m - m^H` accepted as Hermitian.
pub const HERM_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as nonnegative.
pub const PSD_TOL: f64 = 1e-10;
/// Trace / completeness deviation accepted as normalized.
pub const NORM_TOL: f64 = 1e-9;
/// Largest supported system dimension.
pub const MAX_DIM: usize = 64;

/// Validation tolerances. The defaults are the crate constants; the CLI can
/// override them per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm: f64,
    pub psd: f64,
    pub norm: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { herm: HERM_TOL, psd: PSD_TOL, norm: NORM_TOL }
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// A dense complex matrix with finite entries.
///
/// Kraus operators between spaces of different dimension are rectangular, so
/// the type itself does not insist on squareness; [`CMatrix::dim`] is the
/// accessor for the square case.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    inner: DMatrix<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CMatrix{}", self.inner)
    }
}

impl CMatrix {
    pub fn from_dmatrix(inner: DMatrix<C64>) -> Result<Self> {
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CMatrix { inner })
    }

    /// Wraps a matrix produced by arithmetic on already-finite inputs.
    pub(crate) fn wrap(inner: DMatrix<C64>) -> Self {
        CMatrix { inner }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { inner: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(d: usize) -> Self {
        CMatrix { inner: DMatrix::identity(d, d) }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(rows, cols, f))
    }

    /// Row-major construction; every row must have the same length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        if nrows == 0 {
            return Err(Error::MalformedMatrix("matrix has no rows".into()));
        }
        let ncols = rows[0].len();
        if ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::MalformedMatrix("ragged or empty rows".into()));
        }
        Self::from_fn(nrows, ncols, |i, j| rows[i][j])
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| cr(x)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn diag(values: &[C64]) -> Self {
        CMatrix { inner: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)) }
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| cr(x)).collect();
        Self::diag(&v)
    }

    /// `|psi><psi|` for an (unnormalized) vector.
    pub fn projector(psi: &[C64]) -> Self {
        let d = psi.len();
        CMatrix { inner: DMatrix::from_fn(d, d, |i, j| psi[i] * psi[j].conj()) }
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.inner.is_square()
    }

    /// Side length of a square matrix (row count otherwise).
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn adjoint(&self) -> Self {
        CMatrix { inner: self.inner.adjoint() }
    }

    pub fn conj(&self) -> Self {
        CMatrix { inner: self.inner.map(|z| z.conj()) }
    }

    pub fn transpose(&self) -> Self {
        CMatrix { inner: self.inner.transpose() }
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    /// `tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> C64 {
        let (r, k) = self.inner.shape();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..r {
            for j in 0..k {
                acc += self.inner[(i, j)] * other.inner[(j, i)];
            }
        }
        acc
    }

    pub fn scale(&self, s: C64) -> Self {
        CMatrix { inner: &self.inner * s }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        CMatrix { inner: self.inner.map(|z| z * s) }
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max entry magnitude of `self - self^H`.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.inner[(i, j)] - self.inner[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(m + m^H) / 2`.
    pub fn hermitize(&self) -> Self {
        let h = (&self.inner + self.inner.adjoint()) * C64::new(0.5, 0.0);
        CMatrix { inner: h }
    }

    pub fn kron(&self, other: &CMatrix) -> Self {
        CMatrix { inner: self.inner.kronecker(&other.inner) }
    }

    /// `self * other - other * self`.
    pub fn commutator(&self, other: &CMatrix) -> Self {
        CMatrix { inner: &self.inner * &other.inner - &other.inner * &self.inner }
    }

    /// `a * self * a^H`.
    pub fn conjugate_by(&self, a: &CMatrix) -> Self {
        CMatrix { inner: &a.inner * &self.inner * a.inner.adjoint() }
    }

    /// `a^H * self * a`.
    pub fn adjoint_conjugate_by(&self, a: &CMatrix) -> Self {
        CMatrix { inner: a.inner.adjoint() * &self.inner * &a.inner }
    }

    /// Column-stacking vectorization.
    pub fn vec(&self) -> Vec<C64> {
        self.inner.as_slice().to_vec()
    }

    /// Inverse of [`CMatrix::vec`] for a `rows x cols` matrix.
    pub fn unvec(v: &[C64], rows: usize, cols: usize) -> Result<Self> {
        if v.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: v.len() });
        }
        Self::from_dmatrix(DMatrix::from_column_slice(rows, cols, v))
    }

    /// The canonical matrix unit `|i><j|` of a `d x d` space.
    pub fn unit(d: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(d, d);
        m.inner[(i, j)] = cr(1.0);
        m
    }

    /// All `d^2` matrix units in row-major order.
    pub fn units(d: usize) -> Vec<CMatrix> {
        (0..d).flat_map(|i| (0..d).map(move |j| CMatrix::unit(d, i, j))).collect()
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, z: C64) {
        self.inner[(i, j)] = z;
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.inner.column(j).iter().copied().collect()
    }

    /// Entrywise max distance.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        if self.inner.shape() != other.inner.shape() {
            return f64::INFINITY;
        }
        self.inner.iter().zip(other.inner.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn rows(&self) -> Vec<Vec<C64>> {
        (0..self.nrows()).map(|i| (0..self.ncols()).map(|j| self.inner[(i, j)]).collect()).collect()
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl<'a> $tr<&'a CMatrix> for &'a CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: &'a CMatrix) -> CMatrix {
                CMatrix { inner: &self.inner $op &rhs.inner }
            }
        }
        impl $tr<CMatrix> for CMatrix {
            type Output = CMatrix;
            fn $method(self, rhs: CMatrix) -> CMatrix {
                CMatrix { inner: self.inner $op rhs.inner }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix { inner: -&self.inner }
    }
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = self.rows().iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|p| C64::new(p[0], p[1])).collect()).collect();
        CMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, aligned with `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k)
    }

    /// `V diag(f(lambda)) V^H`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let d = self.values.len();
        let v = self.vectors.as_dmatrix();
        let scaled = DMatrix::from_fn(d, d, |i, k| v[(i, k)] * f(self.values[k]));
        CMatrix::wrap(scaled * v.adjoint())
    }
}

fn require_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let r = m.hermiticity_residual();
    if r > tol {
        return Err(Error::NotHermitian { residual: r });
    }
    Ok(())
}

/// Hermitian eigendecomposition with deterministic output: eigenvalues
/// ascending, and each eigenvector's first component of magnitude > 1e-12
/// rotated to be real-positive.
pub fn eig_hermitian(m: &CMatrix) -> Result<HermitianEigen> {
    require_hermitian(m, HERM_TOL)?;
    Ok(eig_hermitian_unchecked(m))
}

pub(crate) fn eig_hermitian_unchecked(m: &CMatrix) -> HermitianEigen {
    let d = m.dim();
    let eig = m.hermitize().inner.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<C64>::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let phase = v
            .iter()
            .find(|z| z.norm() > 1e-12)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(cr(1.0));
        for i in 0..d {
            vectors[(i, col)] = v[i] * phase;
        }
    }
    HermitianEigen { values, vectors: CMatrix::wrap(vectors) }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    m.inner.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Schatten 1-norm: the sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Schatten p-norm for `p >= 1`; `p = inf` gives the operator norm.
pub fn schatten_norm(m: &CMatrix, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("Schatten exponent {p} < 1")));
    }
    let s = singular_values(m);
    if p.is_infinite() {
        return Ok(s.iter().copied().fold(0.0, f64::max));
    }
    Ok(s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Trace distance `||a - b||_1` (without the conventional 1/2).
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    if diff.hermiticity_residual() <= HERM_TOL {
        eig_hermitian_unchecked(&diff).values.iter().map(|x| x.abs()).sum()
    } else {
        trace_norm(&diff)
    }
}

/// `min eigenvalue >= -tol`.
pub fn is_psd(m: &CMatrix, tol: f64) -> Result<bool> {
    require_hermitian(m, HERM_TOL)?;
    Ok(min_eigenvalue(m) >= -tol)
}

pub(crate) fn min_eigenvalue(m: &CMatrix) -> f64 {
    eig_hermitian_unchecked(m).values.first().copied().unwrap_or(0.0)
}

/// Matrix of the map `rho -> sum_i A_i rho A_i^H` acting on column-stacked
/// vectorizations.
///
/// With column stacking, `vec(A X B) = (B^T kron A) vec(X)`, so each Kraus
/// term contributes `conj(A_i) kron A_i`. The unit tests check the defining
/// identity `unvec(M vec(rho)) = sum_i A_i rho A_i^H` directly.
#[derive(Clone, PartialEq)]
pub struct SuperopMatrix {
    dim_in: usize,
    dim_out: usize,
    inner: DMatrix<C64>,
}

impl fmt::Debug for SuperopMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SuperopMatrix({} -> {}){}", self.dim_in, self.dim_out, self.inner)
    }
}

impl SuperopMatrix {
    pub fn identity(d: usize) -> Self {
        SuperopMatrix { dim_in: d, dim_out: d, inner: DMatrix::identity(d * d, d * d) }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim_in || rho.ncols() != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: rho.nrows() });
        }
        let v = nalgebra::DVector::from_column_slice(rho.inner.as_slice());
        let out = &self.inner * v;
        Ok(CMatrix::wrap(DMatrix::from_column_slice(self.dim_out, self.dim_out, out.as_slice())))
    }

    /// The map `self` applied after `first`.
    pub fn after(&self, first: &SuperopMatrix) -> Result<SuperopMatrix> {
        if first.dim_out != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: first.dim_out });
        }
        Ok(SuperopMatrix { dim_in: first.dim_in, dim_out: self.dim_out, inner: &self.inner * &first.inner })
    }

    /// Entrywise sum of two superoperators of the same shape.
    pub fn sum(&self, other: &SuperopMatrix) -> Result<SuperopMatrix> {
        if self.dim_in != other.dim_in || self.dim_out != other.dim_out {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: other.dim_in });
        }
        Ok(SuperopMatrix { dim_in: self.dim_in, dim_out: self.dim_out, inner: &self.inner + &other.inner })
    }

    /// Eigenvalues of a square superoperator (complex Schur form), unsorted.
    pub fn eigenvalues(&self) -> Vec<C64> {
        general_eigenvalues(&self.inner)
    }
}

pub fn superop_matrix(kraus: &[CMatrix]) -> Result<SuperopMatrix> {
    let first = kraus.first().ok_or_else(|| Error::InvalidArgument("empty Kraus list".into()))?;
    let (d_out, d_in) = (first.nrows(), first.ncols());
    let mut acc = DMatrix::<C64>::zeros(d_out * d_out, d_in * d_in);
    for k in kraus {
        if k.nrows() != d_out || k.ncols() != d_in {
            return Err(Error::DimensionMismatch { expected: d_out, found: k.nrows() });
        }
        acc += k.conj().inner.kronecker(&k.inner);
    }
    Ok(SuperopMatrix { dim_in: d_in, dim_out: d_out, inner: acc })
}

/// Eigenvalues of a general complex square matrix.
pub(crate) fn general_eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    let n = m.nrows();
    if n == 0 {
        return Vec::new();
    }
    let schur = nalgebra::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Orthonormal basis of the numerical null space of `m` (right singular
/// vectors with singular value `<= tol * max(1, s_max)`).
pub(crate) fn null_space(m: &DMatrix<C64>, tol: f64) -> Vec<Vec<C64>> {
    let n = m.ncols();
    // Pad to at least square so the SVD returns a full set of right vectors.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::<C64>::zeros(n, n);
        p.view_mut((0, 0), m.shape()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let thresh = tol * s_max.max(1.0);
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= thresh)
        .map(|k| v_t.row(k).iter().map(|z| z.conj()).collect())
        .collect()
}
