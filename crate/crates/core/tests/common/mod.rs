//! Independent reference implementations shared by the integration tests:
//! finite differences on analytic functions, a naive DFT on small grids and
//! a dense Newton iteration for `(MA)_t` in one complex dimension.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Fourth-order central difference of `f` along `axis`.
pub fn fd1(f: &dyn Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> f64 {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[axis] += s;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Fourth-order mixed/pure second difference.
pub fn fd2(f: &dyn Fn(&[f64]) -> f64, x: &[f64], a: usize, b: usize, h: f64) -> f64 {
    let g = |y: &[f64]| fd1(f, y, b, h);
    fd1(&g, x, a, h)
}

/// `d^2 f / dz_i dz̄_j` by finite differences, axes ordered `(x1, y1, x2, y2)`.
pub fn fd_ddc(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, j: usize, h: f64) -> Complex64 {
    let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
    let re = 0.25 * (fd2(f, x, xi, xj, h) + fd2(f, x, yi, yj, h));
    let im = 0.25 * (fd2(f, x, xi, yj, h) - fd2(f, x, yi, xj, h));
    Complex64::new(re, im)
}

/// `d f / dz_i` by finite differences.
pub fn fd_dz(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> Complex64 {
    Complex64::new(0.5 * fd1(f, x, 2 * i, h), -0.5 * fd1(f, x, 2 * i + 1, h))
}

/// Naive DFT differentiation on the `N x N` grid of one complex dimension.
/// Wavenumbers follow the convention with the Nyquist mode removed.
pub struct NaiveDft {
    pub points: usize,
}

impl NaiveDft {
    fn wavenumber(&self, m: usize) -> f64 {
        let n = self.points;
        if m < n / 2 {
            2.0 * PI * m as f64
        } else if m == n / 2 {
            0.0
        } else {
            2.0 * PI * (m as f64 - n as f64)
        }
    }

    /// Matrix of `f -> f_{zz̄}` acting on row-major values `(x, y)`.
    pub fn ddc_matrix(&self) -> DMatrix<f64> {
        let n = self.points;
        let len = n * n;
        let mut m = DMatrix::zeros(len, len);
        for p in 0..len {
            let (px, py) = (p / n, p % n);
            for q in 0..len {
                let (qx, qy) = (q / n, q % n);
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    for b in 0..n {
                        let (kx, ky) = (self.wavenumber(a), self.wavenumber(b));
                        let symbol = -0.25 * (kx * kx + ky * ky);
                        let phase = 2.0
                            * PI
                            * ((a * (px + n - qx) % n) as f64 + (b * (py + n - qy) % n) as f64)
                            / n as f64;
                        acc += Complex64::from_polar(symbol, phase);
                    }
                }
                m[(p, q)] = acc.re / len as f64;
            }
        }
        m
    }
}

/// Residual of `(MA)_t` for a conformal metric `g` in one complex dimension:
/// `log(t g + (log g)_{zz̄} + u_{zz̄}) - log g - u`.
pub fn dense_residual(
    d: &DMatrix<f64>,
    g: &DVector<f64>,
    t: f64,
    u: &DVector<f64>,
) -> DVector<f64> {
    let log_g = g.map(f64::ln);
    let ricci = d * &log_g;
    let ddc_u = d * u;
    DVector::from_fn(u.len(), |i, _| {
        (t * g[i] + ricci[i] + ddc_u[i]).ln() - log_g[i] - u[i]
    })
}

/// Newton with a central-difference Jacobian and dense LU.
pub fn dense_newton(d: &DMatrix<f64>, g: &DVector<f64>, t: f64, tol: f64) -> DVector<f64> {
    let len = g.len();
    let mut u = DVector::zeros(len);
    for _ in 0..50 {
        let r = dense_residual(d, g, t, &u);
        if r.amax() <= tol {
            return u;
        }
        let h = 1e-6;
        let mut jac = DMatrix::zeros(len, len);
        for j in 0..len {
            let mut up = u.clone();
            up[j] += h;
            let mut um = u.clone();
            um[j] -= h;
            let col = (dense_residual(d, g, t, &up) - dense_residual(d, g, t, &um)) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let step = jac.lu().solve(&(-&r)).expect("nonsingular Jacobian");
        u += step;
    }
    panic!("dense Newton did not converge");
}
