//! Kähler curvature tensor of a grid metric and holomorphic sectional
//! curvature bounds.
//!
//! `R_{i j̄ k l̄} = -∂_k ∂_l̄ g_{i j̄} + g^{p q̄} ∂_k g_{i q̄} ∂_l̄ g_{p j̄}`, which in
//! matrix form reads `R_{k l̄} = -∂_k ∂_l̄ G + (∂_k G) G^{-1} (∂_l̄ G)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::InverseMetric;
use crate::error::{Error, Result};
use crate::grid::{HermitianField, ScalarField, TorusGrid};
use crate::hermitian;
use crate::spectral::{ddc_symbol, dz_symbol, dzbar_symbol};

/// Curvature values within this band are treated as zero when classifying.
pub const CURVATURE_ZERO_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `R_{i j̄ k l̄}` at every grid point, flat index `((i n + j) n + k) n + l`.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    grid: TorusGrid,
    data: Vec<Complex64>,
}

impl CurvatureField {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn at(&self, point: usize) -> &[Complex64] {
        let n4 = self.n().pow(4);
        &self.data[point * n4..(point + 1) * n4]
    }

    pub fn component(&self, point: usize, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.n();
        self.at(point)[((i * n + j) * n + k) * n + l]
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest violation of the Kähler symmetries
    /// `R_{i j̄ k l̄} = conj(R_{j ī l k̄}) = R_{k j̄ i l̄} = R_{i l̄ k j̄}`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for p in 0..self.grid.len() {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let r = self.component(p, i, j, k, l);
                            worst = worst
                                .max((r - self.component(p, j, i, l, k).conj()).norm())
                                .max((r - self.component(p, k, j, i, l)).norm())
                                .max((r - self.component(p, i, l, k, j)).norm());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// Curvature tensor of a positive, band-limited metric field.
pub fn curvature_tensor(g: &HermitianField) -> Result<CurvatureField> {
    let grid = g.grid();
    let spec = grid.spectral();
    let n = g.n();
    let nn = n * n;
    let n4 = nn * nn;
    let inv = InverseMetric::new(g)?;
    let hats: Vec<Vec<Complex64>> = (0..nn)
        .map(|e| spec.forward_complex(g.matrices().map(|m| m[e]).collect()))
        .collect();
    let derive = |sym: &(dyn Fn(&[f64; 4]) -> Complex64 + Sync)| -> Vec<Vec<Complex64>> {
        hats.iter().map(|h| spec.apply_symbol(h, sym)).collect()
    };

    let mut data = vec![ZERO; grid.len() * n4];
    for k in 0..n {
        let d_k = derive(&|w| dz_symbol(w, k));
        for l in 0..n {
            let d_lbar = derive(&|w| dzbar_symbol(w, l));
            let dd_kl = derive(&|w| ddc_symbol(w, k, l));
            data.par_chunks_mut(n4).enumerate().for_each(|(p, r)| {
                let gi = inv.at(p);
                let mut a = [ZERO; 4];
                let mut b = [ZERO; 4];
                for e in 0..nn {
                    a[e] = d_k[e][p];
                    b[e] = d_lbar[e][p];
                }
                let mut tmp = [ZERO; 4];
                let mut prod = [ZERO; 4];
                hermitian::matmul(&a[..nn], gi, n, &mut tmp[..nn]);
                hermitian::matmul(&tmp[..nn], &b[..nn], n, &mut prod[..nn]);
                for i in 0..n {
                    for j in 0..n {
                        r[((i * n + j) * n + k) * n + l] = -dd_kl[i * n + j][p] + prod[i * n + j];
                    }
                }
            });
        }
    }
    Ok(CurvatureField {
        grid: grid.clone(),
        data,
    })
}

/// `R(ξ, ξ̄, ξ, ξ̄) / |ξ|_g^4` at a single point.
pub fn sectional_at(r: &[Complex64], g: &[Complex64], xi: &[Complex64], n: usize) -> f64 {
    let mut num = ZERO;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    num += r[((i * n + j) * n + k) * n + l]
                        * xi[i]
                        * xi[j].conj()
                        * xi[k]
                        * xi[l].conj();
                }
            }
        }
    }
    let conj: Vec<Complex64> = xi.iter().map(|z| z.conj()).collect();
    let norm2 = hermitian::quadratic_form(g, &conj, n);
    num.re / (norm2 * norm2)
}

/// Holomorphic sectional curvature in direction `ξ` at every grid point.
pub fn sectional_h(
    r: &CurvatureField,
    g: &HermitianField,
    xi: &[Complex64],
) -> Result<ScalarField> {
    r.grid().check_same(g.grid())?;
    let n = g.n();
    if xi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "direction needs {n} components, got {}",
            xi.len()
        )));
    }
    if xi.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::ZeroDirection);
    }
    let values = (0..g.grid().len())
        .map(|p| sectional_at(r.at(p), g.at(p), xi, n))
        .collect();
    ScalarField::new(g.grid(), values)
}

/// Deterministic unit directions: one for `n = 1`; for `n = 2` a Fibonacci
/// lattice of `samples` points on `CP^1 ≅ S^2` (via the Hopf map) followed by
/// the coordinate and diagonal directions.
pub fn direction_set(n: usize, samples: usize) -> Vec<[Complex64; 2]> {
    if n == 1 {
        return vec![[Complex64::new(1.0, 0.0), ZERO]];
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut dirs: Vec<[Complex64; 2]> = (0..samples)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / samples as f64;
            let theta = z.clamp(-1.0, 1.0).acos();
            let phi = golden * i as f64;
            [
                Complex64::new((0.5 * theta).cos(), 0.0),
                Complex64::from_polar((0.5 * theta).sin(), phi),
            ]
        })
        .collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let one = Complex64::new(1.0, 0.0);
    dirs.extend([
        [one, ZERO],
        [ZERO, one],
        [one * s, one * s],
        [one * s, -one * s],
        [one * s, Complex64::new(0.0, s)],
        [one * s, Complex64::new(0.0, -s)],
    ]);
    dirs
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureClass {
    /// `sup H < 0`
    Negative,
    /// `H ≤ 0` with strict negativity at some point.
    QuasiNegative,
    /// `H ≤ 0` without a strictly negative point.
    Nonpositive,
    /// `H > 0` somewhere.
    Mixed,
}

impl CurvatureClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurvatureClass::Negative => "negative",
            CurvatureClass::QuasiNegative => "quasi-negative",
            CurvatureClass::Nonpositive => "nonpositive",
            CurvatureClass::Mixed => "mixed",
        }
    }

    /// Whether `H ≤ 0` holds everywhere.
    pub fn is_nonpositive(&self) -> bool {
        !matches!(self, CurvatureClass::Mixed)
    }
}

#[derive(Clone, Debug)]
pub struct KappaSummary {
    /// `κ` with `H ≤ -κ` globally, i.e. `-sup_H`.
    pub kappa_const: f64,
    /// `max(0, -sup_ξ H(x, ξ))` pointwise.
    pub kappa_field: ScalarField,
    /// `sup_ξ H(x, ξ)` pointwise.
    pub point_sup: ScalarField,
    pub sup_h: f64,
    pub inf_h: f64,
    pub direction_samples: usize,
    pub classification: CurvatureClass,
}

/// The serialized form of a [`KappaSummary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaRecord {
    #[serde(rename = "sup_H")]
    pub sup_h: f64,
    #[serde(rename = "inf_H")]
    pub inf_h: f64,
    pub kappa_const: f64,
    pub classification: CurvatureClass,
    pub samples: usize,
}

impl KappaSummary {
    pub fn record(&self) -> KappaRecord {
        KappaRecord {
            sup_h: self.sup_h,
            inf_h: self.inf_h,
            kappa_const: self.kappa_const,
            classification: self.classification,
            samples: self.direction_samples,
        }
    }
}

/// Extrema of the holomorphic sectional curvature over grid points and
/// sampled directions. `samples` must be at least 32 when `n = 2`.
pub fn kappa_summary(g: &HermitianField, samples: usize) -> Result<KappaSummary> {
    let n = g.n();
    if n == 2 && samples < 32 {
        return Err(Error::InvalidArgument(format!(
            "need at least 32 direction samples for n = 2, got {samples}"
        )));
    }
    let r = curvature_tensor(g)?;
    let dirs = direction_set(n, samples);
    let extrema: Vec<(f64, f64)> = (0..g.grid().len())
        .into_par_iter()
        .map(|p| {
            dirs.iter()
                .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), d| {
                    let h = sectional_at(r.at(p), g.at(p), &d[..n], n);
                    (hi.max(h), lo.min(h))
                })
        })
        .collect();
    let point_sup = ScalarField::new(g.grid(), extrema.iter().map(|e| e.0).collect())?;
    let sup_h = point_sup.max();
    let inf_h = extrema.iter().fold(f64::INFINITY, |m, e| m.min(e.1));
    let classification = if sup_h < -CURVATURE_ZERO_TOL {
        CurvatureClass::Negative
    } else if sup_h > CURVATURE_ZERO_TOL {
        CurvatureClass::Mixed
    } else if point_sup.min() < -CURVATURE_ZERO_TOL {
        CurvatureClass::QuasiNegative
    } else {
        CurvatureClass::Nonpositive
    };
    Ok(KappaSummary {
        kappa_const: -sup_h,
        kappa_field: point_sup.map(|h| (-h).max(0.0)),
        point_sup,
        sup_h,
        inf_h,
        direction_samples: dirs.len(),
        classification,
    })
}
