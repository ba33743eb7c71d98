//! Test metrics and band-limited fields built from cosine modes.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::ddc;
use crate::error::{Error, Result};
use crate::grid::{HermitianField, ScalarField, TorusGrid};

/// `amplitude * cos(2π (frequency · x) + phase)`; `frequency` has one
/// integer per real axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosineMode {
    pub amplitude: f64,
    pub frequency: Vec<i32>,
    #[serde(default)]
    pub phase: f64,
}

impl CosineMode {
    pub fn new(amplitude: f64, frequency: &[i32], phase: f64) -> Self {
        Self {
            amplitude,
            frequency: frequency.to_vec(),
            phase,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.amplitude * (2.0 * PI * self.dot(x) + self.phase).cos()
    }

    fn dot(&self, x: &[f64]) -> f64 {
        self.frequency
            .iter()
            .zip(x)
            .map(|(&k, &xi)| k as f64 * xi)
            .sum()
    }
}

pub fn eval_modes(modes: &[CosineMode], x: &[f64]) -> f64 {
    modes.iter().map(|m| m.eval(x)).sum()
}

/// Samples a sum of cosine modes on the grid.
pub fn cosine_potential(grid: &TorusGrid, modes: &[CosineMode]) -> Result<ScalarField> {
    for m in modes {
        if m.frequency.len() != grid.real_dims() {
            return Err(Error::InvalidArgument(format!(
                "frequency vector {:?} needs {} components",
                m.frequency,
                grid.real_dims()
            )));
        }
        if m.frequency
            .iter()
            .any(|&k| 2 * k.unsigned_abs() as usize >= grid.points())
        {
            return Err(Error::InvalidArgument(format!(
                "frequency {:?} is not resolved on {} points per axis",
                m.frequency,
                grid.points()
            )));
        }
    }
    Ok(ScalarField::from_fn(grid, |x| eval_modes(modes, x)))
}

/// `I + dd^c φ` for the cosine potential `φ`. Not checked for positivity.
pub fn perturbed_metric(grid: &TorusGrid, modes: &[CosineMode]) -> Result<HermitianField> {
    let phi = cosine_potential(grid, modes)?;
    HermitianField::identity(grid).add(&ddc(&phi)?)
}

/// Random modes with integer frequencies in `[-max_freq, max_freq]` (not all
/// zero), amplitudes uniform in `[-max_amplitude, max_amplitude]` and random phase.
pub fn random_modes<R: Rng>(
    rng: &mut R,
    real_dims: usize,
    count: usize,
    max_freq: i32,
    max_amplitude: f64,
) -> Vec<CosineMode> {
    (0..count)
        .map(|_| {
            let frequency = loop {
                let f: Vec<i32> = (0..real_dims)
                    .map(|_| rng.gen_range(-max_freq..=max_freq))
                    .collect();
                if f.iter().any(|&k| k != 0) {
                    break f;
                }
            };
            CosineMode {
                amplitude: rng.gen_range(-max_amplitude..=max_amplitude),
                frequency,
                phase: rng.gen_range(0.0..2.0 * PI),
            }
        })
        .collect()
}

/// Worst-case bound on `|d^2/dz_i dz̄_j|` of a cosine sum, used to pick safe
/// amplitudes: each mode contributes at most `π^2 |k|^2 |a|`.
pub fn hessian_bound(modes: &[CosineMode]) -> f64 {
    modes
        .iter()
        .map(|m| {
            let k2: f64 = m.frequency.iter().map(|&k| (k * k) as f64).sum();
            PI * PI * k2 * m.amplitude.abs()
        })
        .sum()
}
