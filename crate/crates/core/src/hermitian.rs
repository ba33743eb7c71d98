//! Closed-form linear algebra for the 1x1 and 2x2 Hermitian matrices stored
//! at each grid point. Matrices are row-major slices of length `n*n`.

use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn hermitian_defect(m: &[Complex64], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((m[i * n + j] - m[j * n + i].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(m: &[Complex64], n: usize, tol: f64) -> bool {
    let scale = m.iter().fold(1.0f64, |s, z| s.max(z.norm()));
    hermitian_defect(m, n) <= tol * scale
}

pub fn trace(m: &[Complex64], n: usize) -> f64 {
    (0..n).map(|i| m[i * n + i].re).sum()
}

pub fn det(m: &[Complex64], n: usize) -> f64 {
    match n {
        1 => m[0].re,
        2 => m[0].re * m[3].re - m[1].norm_sqr(),
        _ => unreachable!("complex dimension is 1 or 2"),
    }
}

/// Adjugate, so that `m * adj(m) = det(m) * I`.
pub fn adjugate(m: &[Complex64], n: usize, out: &mut [Complex64]) {
    match n {
        1 => out[0] = Complex64::new(1.0, 0.0),
        2 => {
            out[0] = Complex64::new(m[3].re, 0.0);
            out[1] = -m[1];
            out[2] = -m[2];
            out[3] = Complex64::new(m[0].re, 0.0);
        }
        _ => unreachable!("complex dimension is 1 or 2"),
    }
}

/// Inverse of a Hermitian matrix with positive determinant; `None` otherwise.
pub fn inverse(m: &[Complex64], n: usize, out: &mut [Complex64]) -> Option<f64> {
    let d = det(m, n);
    if !(d > 0.0) || !d.is_finite() {
        return None;
    }
    adjugate(m, n, out);
    for z in out.iter_mut().take(n * n) {
        *z /= d;
    }
    Some(d)
}

/// Eigenvalues in ascending order (second slot unused for n = 1).
pub fn eigenvalues(m: &[Complex64], n: usize) -> [f64; 2] {
    match n {
        1 => [m[0].re, m[0].re],
        2 => {
            let half_tr = 0.5 * (m[0].re + m[3].re);
            let half_diff = 0.5 * (m[0].re - m[3].re);
            let r = (half_diff * half_diff + m[1].norm_sqr()).sqrt();
            [half_tr - r, half_tr + r]
        }
        _ => unreachable!("complex dimension is 1 or 2"),
    }
}

pub fn min_eig(m: &[Complex64], n: usize) -> f64 {
    eigenvalues(m, n)[0]
}

pub fn max_eig(m: &[Complex64], n: usize) -> f64 {
    eigenvalues(m, n)[n - 1]
}

/// Eigenvalues of `b^{-1} a` for Hermitian `a` and positive `b`, ascending.
pub fn relative_eigenvalues(a: &[Complex64], b: &[Complex64], n: usize) -> [f64; 2] {
    match n {
        1 => {
            let l = a[0].re / b[0].re;
            [l, l]
        }
        2 => {
            // det(a - l b) = det(b) l^2 - mix l + det(a)
            let db = det(b, 2);
            let da = det(a, 2);
            let mix = a[0].re * b[3].re + a[3].re * b[0].re - 2.0 * (a[1] * b[1].conj()).re;
            let half = 0.5 * mix / db;
            let disc = (half * half - da / db).max(0.0).sqrt();
            [half - disc, half + disc]
        }
        _ => unreachable!("complex dimension is 1 or 2"),
    }
}

/// `Re tr(a b)`
pub fn trace_product(a: &[Complex64], b: &[Complex64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[i * n + j] * b[j * n + i]).re;
        }
    }
    acc
}

/// `v^H m v` (real for Hermitian `m`).
pub fn quadratic_form(m: &[Complex64], v: &[Complex64], n: usize) -> f64 {
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += v[i].conj() * m[i * n + j] * v[j];
        }
    }
    acc.re
}

/// Product `a * b` of two `n x n` matrices.
pub fn matmul(a: &[Complex64], b: &[Complex64], n: usize, out: &mut [Complex64]) {
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = acc;
        }
    }
}
