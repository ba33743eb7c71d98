//! Fourier transforms on the periodic grid and the symbols of the complex
//! derivatives `d/dz_i`, `d/dz̄_j`.
//!
//! The Nyquist wavenumber is set to zero on every axis, so each symbol is a
//! product of per-axis first-order factors. This keeps `ddc` exactly
//! Hermitian and makes the discrete integration-by-parts identities hold
//! mode by mode.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Spectral {
    dims: usize,
    points: usize,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl Spectral {
    pub(crate) fn new(n: usize, points: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(points);
        let inverse = planner.plan_fft_inverse(points);
        let wavenumbers = (0..points)
            .map(|m| {
                if m < points / 2 {
                    2.0 * PI * m as f64
                } else if m == points / 2 {
                    0.0
                } else {
                    2.0 * PI * (m as f64 - points as f64)
                }
            })
            .collect();
        let dims = 2 * n;
        Self {
            dims,
            points,
            len: points.pow(dims as u32),
            forward,
            inverse,
            wavenumbers,
        }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.len
    }

    /// Angular wavevector `(kx1, ky1, kx2, ky2)` of a flat mode index.
    #[inline]
    pub(crate) fn wavevector(&self, idx: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        let mut rem = idx;
        for axis in (0..self.dims).rev() {
            out[axis] = self.wavenumbers[rem % self.points];
            rem /= self.points;
        }
        out
    }

    pub(crate) fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let data = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_complex(data)
    }

    pub(crate) fn forward_complex(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut data, &self.forward);
        data
    }

    /// Normalized inverse transform.
    #[cfg(test)]
    pub(crate) fn inverse_complex(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / self.len as f64;
        data.par_iter_mut().for_each(|z| *z *= scale);
        data
    }

    /// Inverse transform without the `1/len` factor; callers fold it into
    /// their symbol.
    pub(crate) fn inverse_unnormalized(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut data, &self.inverse);
        data
    }

    /// Multiplies a spectrum by `symbol(k)` and returns the physical field.
    pub(crate) fn apply_symbol(
        &self,
        spectrum: &[Complex64],
        symbol: impl Fn(&[f64; 4]) -> Complex64 + Sync,
    ) -> Vec<Complex64> {
        let scale = 1.0 / self.len as f64;
        let out = spectrum
            .par_iter()
            .enumerate()
            .map(|(idx, z)| z * symbol(&self.wavevector(idx)) * scale)
            .collect();
        self.inverse_unnormalized(out)
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len);
        let p = self.points;
        let zero = Complex64::new(0.0, 0.0);
        for axis in 0..self.dims {
            let stride = p.pow((self.dims - 1 - axis) as u32);
            if stride == 1 {
                let lines_per_task = (4096 / p).max(1);
                data.par_chunks_mut(p * lines_per_task).for_each(|chunk| {
                    let mut scratch = vec![zero; fft.get_inplace_scratch_len()];
                    fft.process_with_scratch(chunk, &mut scratch)
                });
            } else {
                // gather BLOCK neighbouring lines at a time so every read and
                // write touches a contiguous run
                let block = STRIDED_BLOCK.min(stride);
                data.par_chunks_mut(p * stride).for_each(|slab| {
                    let mut buf = vec![zero; block * p];
                    let mut scratch = vec![zero; fft.get_inplace_scratch_len()];
                    for i0 in (0..stride).step_by(block) {
                        for k in 0..p {
                            let row = &slab[k * stride + i0..k * stride + i0 + block];
                            for (b, &z) in row.iter().enumerate() {
                                buf[b * p + k] = z;
                            }
                        }
                        fft.process_with_scratch(&mut buf, &mut scratch);
                        for k in 0..p {
                            let row = &mut slab[k * stride + i0..k * stride + i0 + block];
                            for (b, z) in row.iter_mut().enumerate() {
                                *z = buf[b * p + k];
                            }
                        }
                    }
                });
            }
        }
    }
}

const STRIDED_BLOCK: usize = 16;

/// Symbol of `d/dz_i = (d/dx_i - i d/dy_i) / 2`.
#[inline]
pub(crate) fn dz_symbol(k: &[f64; 4], i: usize) -> Complex64 {
    Complex64::new(0.5 * k[2 * i + 1], 0.5 * k[2 * i])
}

/// Symbol of `d/dz̄_j = (d/dx_j + i d/dy_j) / 2`.
#[inline]
pub(crate) fn dzbar_symbol(k: &[f64; 4], j: usize) -> Complex64 {
    Complex64::new(-0.5 * k[2 * j + 1], 0.5 * k[2 * j])
}

/// Symbol of `d^2/dz_i dz̄_j`.
#[inline]
pub(crate) fn ddc_symbol(k: &[f64; 4], i: usize, j: usize) -> Complex64 {
    dz_symbol(k, i) * dzbar_symbol(k, j)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_identity() {
        let s = Spectral::new(2, 8);
        let values: Vec<f64> = (0..s.len()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let back = s.inverse_complex(s.forward_real(&values));
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_symbol_is_quarter_laplacian() {
        let k = [3.0, -2.0, 1.5, 0.5];
        let s = ddc_symbol(&k, 0, 0);
        assert!((s.re + 0.25 * (9.0 + 4.0)).abs() < 1e-15);
        assert!(s.im.abs() < 1e-15);
    }
}
