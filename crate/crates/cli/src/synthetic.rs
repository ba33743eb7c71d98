//! Random band-limited `(v, φ)` pairs with `v < 0` and `Δ_ω v >= -φ`.

use std::f64::consts::PI;

use cma_core::testbed::{cosine_potential, hessian_bound, random_modes};
use cma_core::{laplacian, HermitianField, Result, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::SyntheticSection;

/// `v = w - max w - c` for a random cosine sum `w` and `c ∈ [0.5, 2)`;
/// `φ = (-Δ_ω v)_+ + ψ` with a random nonnegative single-mode bump `ψ`.
pub fn synthetic_pair(
    omega: &HermitianField,
    seed: u64,
    syn: &SyntheticSection,
) -> Result<(ScalarField, ScalarField)> {
    let grid = omega.grid();
    let dims = grid.real_dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_freq = syn.max_freq.min(grid.points() as i32 / 2 - 1);
    let mut modes = random_modes(&mut rng, dims, syn.modes, max_freq, 1.0);
    let s = syn.amplitude / hessian_bound(&modes);
    for m in &mut modes {
        m.amplitude *= s;
    }
    let w = cosine_potential(grid, &modes)?;
    let offset = rng.gen_range(0.5..2.0);
    let v = w.shift(-(w.max() + offset));

    let bump_amp = rng.gen_range(0.0..0.5);
    let freq: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1..=1) as f64).collect();
    let phase = rng.gen_range(0.0..2.0 * PI);
    let psi = ScalarField::from_fn(grid, |x| {
        let dot: f64 = freq.iter().zip(x).map(|(k, xi)| k * xi).sum();
        bump_amp * (1.0 + (2.0 * PI * dot + phase).cos())
    });
    let phi = laplacian(omega, &v)?.map(|l| (-l).max(0.0)).add(&psi)?;
    Ok((v, phi))
}
