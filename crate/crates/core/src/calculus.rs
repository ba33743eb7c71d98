//! Spectral Kähler calculus on the torus: complex Hessians, determinants,
//! Laplacians, gradients and integrals.
//!
//! `dd^c f` is represented by the coefficient matrix `f_{i j̄} = d^2 f / dz_i dz̄_j`,
//! so `(MA)_t` reads `det(g_t) = e^u det(g)` pointwise and volumes are
//! `det(g) dVol` with `dVol` the flat unit-torus measure.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{HermitianField, ScalarField, TorusGrid};
use crate::hermitian;
use crate::spectral::{ddc_symbol, dz_symbol};

fn check_finite(f: &ScalarField) -> Result<()> {
    match f.values().iter().position(|v| !v.is_finite()) {
        Some(point) => Err(Error::NonFinite { point }),
        None => Ok(()),
    }
}

/// Spectrum of `f - mean f`. Derivatives ignore the mean, and removing it
/// first keeps a large constant from leaking roundoff into every mode.
fn centered_spectrum(f: &ScalarField) -> Vec<Complex64> {
    let m = f.mean();
    let centered: Vec<f64> = f.values().iter().map(|v| v - m).collect();
    f.grid().spectral().forward_real(&centered)
}

/// Complex Hessian `d^2 f / dz_i dz̄_j`, computed spectrally.
pub fn ddc(f: &ScalarField) -> Result<HermitianField> {
    check_finite(f)?;
    let grid = f.grid();
    let spec = grid.spectral();
    let n = grid.n();
    let mut data = vec![Complex64::new(0.0, 0.0); grid.len() * n * n];
    let first = f.values()[0];
    if f.values().iter().all(|&v| v == first) {
        return Ok(HermitianField::from_vec_unchecked(grid, data));
    }
    let hat = centered_spectrum(f);
    if n == 1 {
        let entry = spec.apply_symbol(&hat, |k| ddc_symbol(k, 0, 0));
        data.par_iter_mut()
            .zip(entry.par_iter())
            .for_each(|(m, z)| *m = Complex64::new(z.re, 0.0));
    } else {
        // both diagonal entries are real fields: one transform carries the
        // first in its real part and the second in its imaginary part
        let i = Complex64::new(0.0, 1.0);
        let diag = spec.apply_symbol(&hat, |k| ddc_symbol(k, 0, 0) + i * ddc_symbol(k, 1, 1));
        let off = spec.apply_symbol(&hat, |k| ddc_symbol(k, 0, 1));
        data.par_chunks_mut(4)
            .zip(diag.par_iter().zip(off.par_iter()))
            .for_each(|(m, (d, z))| {
                m[0] = Complex64::new(d.re, 0.0);
                m[1] = *z;
                m[2] = z.conj();
                m[3] = Complex64::new(d.im, 0.0);
            });
    }
    Ok(HermitianField::from_vec_unchecked(grid, data))
}

/// `(d f / dz_i)_i` as `n` complex fields.
pub fn dz(f: &ScalarField) -> Result<Vec<Vec<Complex64>>> {
    check_finite(f)?;
    let grid = f.grid();
    let spec = grid.spectral();
    let hat = centered_spectrum(f);
    Ok((0..grid.n())
        .map(|i| spec.apply_symbol(&hat, |k| dz_symbol(k, i)))
        .collect())
}

/// `base + dd^c(potential)`. Positivity is the caller's to check.
pub fn metric_from_potential(
    base: &HermitianField,
    potential: &ScalarField,
) -> Result<HermitianField> {
    base.grid().check_same(potential.grid())?;
    base.add(&ddc(potential)?)
}

/// Smallest eigenvalue over the grid, relative to the flat identity metric.
pub fn min_eigenvalue(h: &HermitianField) -> f64 {
    min_eigenvalue_with_index(h).0
}

pub fn min_eigenvalue_with_index(h: &HermitianField) -> (f64, usize) {
    let n = h.n();
    let mut best = (f64::INFINITY, 0);
    for (p, m) in h.matrices().enumerate() {
        let e = hermitian::min_eig(m, n);
        if e < best.0 {
            best = (e, p);
        }
    }
    best
}

/// Pointwise `log(det a / det b)`.
pub fn log_ratio_det(a: &HermitianField, b: &HermitianField) -> Result<ScalarField> {
    a.grid().check_same(b.grid())?;
    let n = a.n();
    let mut out = Vec::with_capacity(a.grid().len());
    for (p, (ma, mb)) in a.matrices().zip(b.matrices()).enumerate() {
        let da = hermitian::det(ma, n);
        let db = hermitian::det(mb, n);
        if !(da > 0.0) {
            return Err(Error::NonPositiveDeterminant { point: p, det: da });
        }
        if !(db > 0.0) {
            return Err(Error::NonPositiveDeterminant { point: p, det: db });
        }
        out.push((da / db).ln());
    }
    Ok(ScalarField::from_vec_unchecked(a.grid(), out))
}

/// Pointwise inverse and determinant of a positive metric, reused by every
/// operator that needs `g^{-1}`.
#[derive(Clone, Debug)]
pub struct InverseMetric {
    grid: TorusGrid,
    inv: Vec<Complex64>,
    det: Vec<f64>,
}

impl InverseMetric {
    pub fn new(g: &HermitianField) -> Result<Self> {
        let n = g.n();
        let nn = n * n;
        let mut inv = vec![Complex64::new(0.0, 0.0); g.grid().len() * nn];
        let mut det = vec![0.0; g.grid().len()];
        for (p, (m, out)) in g.matrices().zip(inv.chunks_exact_mut(nn)).enumerate() {
            match hermitian::inverse(m, n, out) {
                Some(d) if hermitian::trace(m, n) > 0.0 => det[p] = d,
                _ => return Err(Error::SingularMetric { point: p }),
            }
        }
        Ok(Self {
            grid: g.grid().clone(),
            inv,
            det,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn at(&self, point: usize) -> &[Complex64] {
        let nn = self.grid.n() * self.grid.n();
        &self.inv[point * nn..(point + 1) * nn]
    }

    pub fn det(&self) -> &[f64] {
        &self.det
    }

    /// `tr(g^{-1} h)` pointwise.
    pub fn trace_of(&self, h: &HermitianField) -> Result<ScalarField> {
        self.grid.check_same(h.grid())?;
        let n = self.grid.n();
        let nn = n * n;
        let values: Vec<f64> = self
            .inv
            .par_chunks(nn)
            .zip(h.data().par_chunks(nn))
            .map(|(gi, m)| hermitian::trace_product(gi, m, n))
            .collect();
        Ok(ScalarField::from_vec_unchecked(&self.grid, values))
    }

    /// Kähler Laplacian `tr(g^{-1} dd^c f)`.
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(f.grid())?;
        self.trace_of(&ddc(f)?)
    }

    /// `|df|^2_g = g^{i j̄} f_{z_i} f_{z̄_j}`.
    pub fn grad_norm_sq(&self, f: &ScalarField) -> Result<ScalarField> {
        self.grid.check_same(f.grid())?;
        let n = self.grid.n();
        let nn = n * n;
        let d = dz(f)?;
        let values: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|p| {
                let mut a = [Complex64::new(0.0, 0.0); 2];
                for i in 0..n {
                    a[i] = d[i][p];
                }
                hermitian::quadratic_form(&self.inv[p * nn..(p + 1) * nn], &a[..n], n).max(0.0)
            })
            .collect();
        Ok(ScalarField::from_vec_unchecked(&self.grid, values))
    }
}

/// Kähler Laplacian `Δ_g f = tr(g^{-1} dd^c f)`.
pub fn laplacian(g: &HermitianField, f: &ScalarField) -> Result<ScalarField> {
    InverseMetric::new(g)?.laplacian(f)
}

/// Pointwise `|∇f|^2_g` with `f_z = (f_x - i f_y) / 2`.
pub fn grad_norm_sq(g: &HermitianField, f: &ScalarField) -> Result<ScalarField> {
    InverseMetric::new(g)?.grad_norm_sq(f)
}

/// Compensated (Neumaier) summation. Sequential, so the result does not
/// depend on the thread count.
pub fn accurate_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `∫ f det(vol) dVol` by the uniform periodic rule. Summation is sequential
/// so results do not depend on the thread count.
pub fn integrate(f: &ScalarField, vol: &HermitianField) -> Result<f64> {
    f.grid().check_same(vol.grid())?;
    let n = vol.n();
    let sum = accurate_sum(
        f.values()
            .iter()
            .zip(vol.matrices())
            .map(|(&v, m)| v * hermitian::det(m, n)),
    );
    Ok(sum * f.grid().cell_volume())
}

/// `∫ f dVol` against the flat measure.
pub fn integrate_flat(f: &ScalarField) -> f64 {
    accurate_sum(f.values().iter().copied()) * f.grid().cell_volume()
}

/// `∫ f w dVol` for an explicit density `w`.
pub fn integrate_weighted(f: &ScalarField, w: &ScalarField) -> Result<f64> {
    f.grid().check_same(w.grid())?;
    let sum = accurate_sum(f.values().iter().zip(w.values()).map(|(a, b)| a * b));
    Ok(sum * f.grid().cell_volume())
}

/// `S = tr(g_t^{-1} g) = σ_{n-1}/σ_n` of the eigenvalues of `ω_t` relative to `ω`.
pub fn trace_s(omega_t: &HermitianField, omega: &HermitianField) -> Result<ScalarField> {
    InverseMetric::new(omega_t)?.trace_of(omega)
}

/// Smallest and largest eigenvalue of `a` relative to `b`, pointwise.
pub fn relative_eigen_range(
    a: &HermitianField,
    b: &HermitianField,
) -> Result<(ScalarField, ScalarField)> {
    a.grid().check_same(b.grid())?;
    let n = a.n();
    let mut lo = Vec::with_capacity(a.grid().len());
    let mut hi = Vec::with_capacity(a.grid().len());
    for (p, (ma, mb)) in a.matrices().zip(b.matrices()).enumerate() {
        if !(hermitian::det(mb, n) > 0.0) {
            return Err(Error::SingularMetric { point: p });
        }
        let ev = hermitian::relative_eigenvalues(ma, mb, n);
        lo.push(ev[0]);
        hi.push(ev[n - 1]);
    }
    Ok((
        ScalarField::from_vec_unchecked(a.grid(), lo),
        ScalarField::from_vec_unchecked(a.grid(), hi),
    ))
}
