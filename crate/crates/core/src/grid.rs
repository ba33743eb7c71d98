//! Uniform periodic grids on the unit torus `[0,1)^{2n}` and the fields that
//! live on them.
//!
//! Real axes are ordered `(x1, y1, x2, y2)` with `z_i = x_i + i y_i`. Storage
//! is row-major with the last axis varying fastest.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian;
use crate::spectral::Spectral;

pub const MAX_POINTS_N1: usize = 128;
pub const MAX_POINTS_N2: usize = 64;

/// Discretization of `C^n / Z^{2n}` for `n = 1, 2`.
///
/// Cloning is cheap; the FFT plans are shared.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

struct GridInner {
    n: usize,
    points: usize,
    len: usize,
    spectral: Spectral,
}

impl TorusGrid {
    /// `n` is the complex dimension, `points` the number of samples per real axis.
    pub fn new(n: usize, points: usize) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::InvalidGrid(format!(
                "complex dimension must be 1 or 2, got {n}"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        let max = if n == 1 { MAX_POINTS_N1 } else { MAX_POINTS_N2 };
        if points > max {
            return Err(Error::InvalidGrid(format!(
                "points per axis limited to {max} for n = {n}, got {points}"
            )));
        }
        let len = points.pow(2 * n as u32);
        Ok(Self {
            inner: Arc::new(GridInner {
                n,
                points,
                len,
                spectral: Spectral::new(n, points),
            }),
        })
    }

    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Points per real axis.
    pub fn points(&self) -> usize {
        self.inner.points
    }

    pub fn real_dims(&self) -> usize {
        2 * self.inner.n
    }

    /// Total number of grid points, `points^{2n}`.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.inner.points as f64
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.inner.len as f64
    }

    /// Largest symbol of the flat complex Laplacian on this grid. Roundoff in
    /// a spectral derivative of order `2k` grows like `ε · gain^k`.
    pub fn spectral_gain(&self) -> f64 {
        let k = 2.0 * std::f64::consts::PI * (self.inner.points / 2 - 1) as f64;
        self.real_dims() as f64 * k * k / 4.0
    }

    pub(crate) fn spectral(&self) -> &Spectral {
        &self.inner.spectral
    }

    /// Integer multi-index of a flat point index, in axis order.
    pub fn multi_index(&self, idx: usize) -> [usize; 4] {
        let mut out = [0usize; 4];
        let p = self.inner.points;
        let mut rem = idx;
        for axis in (0..self.real_dims()).rev() {
            out[axis] = rem % p;
            rem /= p;
        }
        out
    }

    /// Real coordinates in `[0,1)` of a flat point index; unused axes are zero.
    pub fn coords(&self, idx: usize) -> [f64; 4] {
        let mi = self.multi_index(idx);
        let h = self.spacing();
        let mut out = [0.0; 4];
        for axis in 0..self.real_dims() {
            out[axis] = mi[axis] as f64 * h;
        }
        out
    }

    pub fn same_as(&self, other: &TorusGrid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.n == other.inner.n && self.inner.points == other.inner.points)
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n", &self.inner.n)
            .field("points", &self.inner.points)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// Real-valued grid function.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    /// Wraps `values`, rejecting wrong lengths and non-finite entries.
    pub fn new(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(point) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { point });
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Skips the finiteness scan; callers guarantee the length.
    pub(crate) fn from_vec_unchecked(grid: &TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self::from_vec_unchecked(grid, vec![c; grid.len()])
    }

    /// Samples `f` at the grid coordinates.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.real_dims();
        let values = (0..grid.len()).map(|i| f(&grid.coords(i)[..d])).collect();
        Self::from_vec_unchecked(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self::from_vec_unchecked(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Result<Self> {
        self.zip_map(other, |a, b| a + c * b)
    }

    /// Maximum value and its first grid location.
    pub fn max_with_index(&self) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    /// Minimum value and its first grid location.
    pub fn min_with_index(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.max_with_index().0
    }

    pub fn min(&self) -> f64 {
        self.min_with_index().0
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Grid mean, i.e. the flat integral over the unit torus.
    pub fn mean(&self) -> f64 {
        crate::calculus::accurate_sum(self.values.iter().copied()) / self.values.len() as f64
    }
}

/// One `n x n` Hermitian matrix per grid point, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianField {
    grid: TorusGrid,
    data: Vec<Complex64>,
}

impl HermitianField {
    pub fn new(grid: &TorusGrid, data: Vec<Complex64>) -> Result<Self> {
        let n = grid.n();
        let expected = grid.len() * n * n;
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: data.len(),
            });
        }
        for (p, m) in data.chunks_exact(n * n).enumerate() {
            if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::NonFinite { point: p });
            }
            if !hermitian::is_hermitian(m, n, 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "matrix at grid point {p} is not Hermitian"
                )));
            }
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    pub(crate) fn from_vec_unchecked(grid: &TorusGrid, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), grid.len() * grid.n() * grid.n());
        Self {
            grid: grid.clone(),
            data,
        }
    }

    /// The same matrix at every point. `matrix` is row-major `n x n`.
    pub fn constant(grid: &TorusGrid, matrix: &[Complex64]) -> Result<Self> {
        let n = grid.n();
        if matrix.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                got: matrix.len(),
            });
        }
        if !hermitian::is_hermitian(matrix, n, 1e-14) {
            return Err(Error::InvalidArgument("matrix is not Hermitian".into()));
        }
        let mut data = Vec::with_capacity(grid.len() * n * n);
        for _ in 0..grid.len() {
            data.extend_from_slice(matrix);
        }
        Ok(Self::from_vec_unchecked(grid, data))
    }

    pub fn scaled_identity(grid: &TorusGrid, c: f64) -> Self {
        let n = grid.n();
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            m[i * n + i] = Complex64::new(c, 0.0);
        }
        Self::constant(grid, &m).expect("scaled identity is Hermitian")
    }

    /// The flat metric.
    pub fn identity(grid: &TorusGrid) -> Self {
        Self::scaled_identity(grid, 1.0)
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::scaled_identity(grid, 0.0)
    }

    /// Builds a field by evaluating `f` at each point index; `f` writes `n*n` entries.
    pub fn from_point_fn(grid: &TorusGrid, f: impl Fn(usize, &mut [Complex64])) -> Self {
        let n = grid.n();
        let mut data = vec![Complex64::new(0.0, 0.0); grid.len() * n * n];
        for (p, m) in data.chunks_exact_mut(n * n).enumerate() {
            f(p, m);
        }
        Self::from_vec_unchecked(grid, data)
    }

    /// Scalar multiple of the identity with a varying factor.
    pub fn conformal(factor: &ScalarField) -> Self {
        let grid = factor.grid();
        let n = grid.n();
        Self::from_point_fn(grid, |p, m| {
            for i in 0..n {
                m[i * n + i] = Complex64::new(factor.values()[p], 0.0);
            }
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    /// Matrix entries at one point.
    pub fn at(&self, point: usize) -> &[Complex64] {
        let nn = self.n() * self.n();
        &self.data[point * nn..(point + 1) * nn]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Per-point matrices as slices.
    pub fn matrices(&self) -> std::slice::ChunksExact<'_, Complex64> {
        let nn = self.n() * self.n();
        self.data.chunks_exact(nn)
    }

    /// Scalar field of one matrix entry's real part (useful for plotting/tests).
    pub fn entry_re(&self, i: usize, j: usize) -> ScalarField {
        let n = self.n();
        ScalarField::from_vec_unchecked(
            &self.grid,
            self.matrices().map(|m| m[i * n + j].re).collect(),
        )
    }

    pub fn entry(&self, i: usize, j: usize) -> Vec<Complex64> {
        let n = self.n();
        self.matrices().map(|m| m[i * n + j]).collect()
    }

    pub fn add(&self, other: &HermitianField) -> Result<Self> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &HermitianField) -> Result<Self> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_vec_unchecked(&self.grid, self.data.iter().map(|z| z * c).collect())
    }

    /// `a * self + b * other`
    pub fn lincomb(&self, a: f64, other: &HermitianField, b: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self::from_vec_unchecked(
            &self.grid,
            self.data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x * a + y * b)
                .collect(),
        ))
    }

    /// Largest deviation from Hermitian symmetry over all points.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        self.matrices()
            .map(|m| hermitian::hermitian_defect(m, n))
            .fold(0.0, f64::max)
    }

    /// Pointwise determinant (real for Hermitian matrices).
    pub fn det(&self) -> ScalarField {
        let n = self.n();
        ScalarField::from_vec_unchecked(
            &self.grid,
            self.matrices().map(|m| hermitian::det(m, n)).collect(),
        )
    }

    /// Pointwise smallest eigenvalue.
    pub fn min_eigenvalue_field(&self) -> ScalarField {
        let n = self.n();
        ScalarField::from_vec_unchecked(
            &self.grid,
            self.matrices().map(|m| hermitian::min_eig(m, n)).collect(),
        )
    }
}
