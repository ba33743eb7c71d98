//! Damped Newton iteration for
//! `Φ(t, u) = log det(tω + dd^c log ω^n + dd^c u) - log det ω - u = 0`
//! with the linearization `(Δ_t - 1)` inverted by preconditioned conjugate
//! gradients.
//!
//! The linear system is solved in the symmetric form `W (1 - Δ_t) h = W b`
//! with `W = det g_t`, since `Δ_t` is self-adjoint for the volume `det g_t dVol`.
//! The preconditioner is the constant-coefficient operator with the grid
//! means of `W` and `adj(g_t)`, diagonal in Fourier space and exact for flat states.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{ddc, integrate, log_ratio_det, InverseMetric};
use crate::error::{Error, Result};
use crate::grid::{HermitianField, ScalarField, TorusGrid};
use crate::hermitian;
use crate::spectral::ddc_symbol;

/// Inputs of `(MA)_t` that do not depend on `t`.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub omega: HermitianField,
    /// `log det ω` relative to the flat volume form.
    pub ricci_potential: ScalarField,
    /// `dd^c log det ω`.
    pub ddc_ricci: HermitianField,
}

impl ProblemData {
    pub fn new(omega: HermitianField) -> Result<Self> {
        let (min_eig, point) = crate::calculus::min_eigenvalue_with_index(&omega);
        if !(min_eig > 0.0) {
            return Err(Error::SingularMetric { point });
        }
        let flat = HermitianField::identity(omega.grid());
        let ricci_potential = log_ratio_det(&omega, &flat)?;
        let ddc_ricci = ddc(&ricci_potential)?;
        Ok(Self {
            omega,
            ricci_potential,
            ddc_ricci,
        })
    }

    pub fn flat(grid: &TorusGrid) -> Self {
        Self::new(HermitianField::identity(grid)).expect("flat metric is positive")
    }

    pub fn grid(&self) -> &TorusGrid {
        self.omega.grid()
    }

    pub fn n(&self) -> usize {
        self.omega.n()
    }

    /// `tω + dd^c log ω^n`, the form whose positivity defines `t_1`.
    pub fn reference_form(&self, t: f64) -> HermitianField {
        self.omega
            .lincomb(t, &self.ddc_ricci, 1.0)
            .expect("problem fields share a grid")
    }

    /// `ω_t = tω + dd^c log ω^n + dd^c u`.
    pub fn form_at(&self, t: f64, u: &ScalarField) -> Result<HermitianField> {
        self.grid().check_same(u.grid())?;
        self.reference_form(t).add(&ddc(u)?)
    }

    /// `∫ det ω dVol`
    pub fn volume(&self) -> f64 {
        integrate(&ScalarField::constant(self.grid(), 1.0), &self.omega).expect("same grid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Newton stops once `sup |Φ| ≤ tol`.
    pub tol: f64,
    pub max_newton: usize,
    pub max_backtracks: usize,
    /// Cap on the relative linear tolerance; the forcing term used at a
    /// Newton step is `min(linear_tol, sup |Φ|)`.
    pub linear_tol: f64,
    /// Candidate forms need `min eigenvalue > pos_floor`.
    pub pos_floor: f64,
    pub max_linear_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_newton: 40,
            max_backtracks: 30,
            linear_tol: 1e-3,
            pos_floor: 1e-8,
            max_linear_iters: 500,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.tol >= 0.0) {
            return bad("solver.tol must be >= 0");
        }
        if !(self.linear_tol > 0.0 && self.linear_tol < 1.0) {
            return bad("solver.linear_tol must lie in (0, 1)");
        }
        if !(self.pos_floor >= 0.0) {
            return bad("solver.pos_floor must be >= 0");
        }
        if self.max_newton == 0 || self.max_linear_iters == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }
}

/// One row of the Newton convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonStep {
    pub iter: usize,
    pub residual_sup: f64,
    /// Step length that produced this iterate (1 for the starting point).
    pub lambda: f64,
    pub linear_iters: usize,
}

/// An accepted solution of `(MA)_t`.
#[derive(Clone, Debug)]
pub struct ContinuityState {
    pub t: f64,
    pub u: ScalarField,
    pub omega_t: HermitianField,
    pub residual_sup: f64,
    pub newton_iters: usize,
    pub trace: Vec<NewtonStep>,
    inverse: InverseMetric,
}

impl ContinuityState {
    /// Builds a state from `(t, u)` without solving; used for synthetic
    /// inputs and for re-verifying stored solutions.
    pub fn from_potential(p: &ProblemData, t: f64, u: ScalarField) -> Result<Self> {
        let (omega_t, phi) = evaluate(p, t, &u, 0.0)?;
        let inverse = InverseMetric::new(&omega_t)?;
        Ok(Self {
            t,
            u,
            omega_t,
            residual_sup: phi.sup_norm(),
            newton_iters: 0,
            trace: Vec::new(),
            inverse,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.u.grid()
    }

    pub fn inverse_metric(&self) -> &InverseMetric {
        &self.inverse
    }

    /// `∫ det ω_t dVol`
    pub fn volume(&self) -> f64 {
        crate::calculus::accurate_sum(self.inverse.det().iter().copied())
            * self.grid().cell_volume()
    }

    /// `max(r_{k+1} / r_k^2)` over the last three residuals of the trace.
    pub fn quadratic_tail(&self) -> Option<f64> {
        quadratic_tail(&self.trace)
    }
}

pub fn quadratic_tail(trace: &[NewtonStep]) -> Option<f64> {
    if trace.len() < 3 {
        return None;
    }
    let r: Vec<f64> = trace[trace.len() - 3..]
        .iter()
        .map(|s| s.residual_sup)
        .collect();
    Some((r[1] / (r[0] * r[0])).max(r[2] / (r[1] * r[1])))
}

fn evaluate(
    p: &ProblemData,
    t: f64,
    u: &ScalarField,
    pos_floor: f64,
) -> Result<(HermitianField, ScalarField)> {
    let form = p.form_at(t, u)?;
    let n = p.n();
    for (point, m) in form.matrices().enumerate() {
        let e = hermitian::min_eig(m, n);
        if !(e > pos_floor) {
            return Err(Error::PositivityLost {
                t,
                point,
                min_eig: e,
            });
        }
    }
    let phi = log_ratio_det(&form, &p.omega)?.sub(u)?;
    Ok((form, phi))
}

/// `Φ(t, u)`; the zero field exactly when `u` solves `(MA)_t`.
pub fn residual(p: &ProblemData, t: f64, u: &ScalarField) -> Result<ScalarField> {
    Ok(evaluate(p, t, u, 0.0)?.1)
}

/// `(Δ_t - 1) h` with `Δ_t` the Laplacian of the state's `ω_t`.
pub fn linearized_apply(state: &ContinuityState, h: &ScalarField) -> Result<ScalarField> {
    apply_operator(&state.inverse, h)
}

fn apply_operator(inv: &InverseMetric, h: &ScalarField) -> Result<ScalarField> {
    inv.laplacian(h)?.sub(h)
}

/// Solves `(Δ_t - 1) h = rhs` with `sup |(Δ_t - 1) h - rhs| ≤ tol sup |rhs|`.
pub fn solve_linear(state: &ContinuityState, rhs: &ScalarField, tol: f64) -> Result<ScalarField> {
    Ok(pcg(
        &state.inverse,
        rhs,
        tol,
        SolverConfig::default().max_linear_iters,
    )?
    .0)
}

struct Preconditioner {
    symbol: Vec<f64>,
}

impl Preconditioner {
    fn new(inv: &InverseMetric) -> Self {
        let grid = inv.grid();
        let n = grid.n();
        let len = grid.len() as f64;
        let w_mean = inv.det().iter().sum::<f64>() / len;
        // mean of adj(g) = det(g) g^{-1}
        let mut adj = [Complex64::new(0.0, 0.0); 4];
        for (p, &d) in inv.det().iter().enumerate() {
            for (a, z) in adj.iter_mut().zip(inv.at(p)) {
                *a += z * d;
            }
        }
        for a in adj.iter_mut() {
            *a /= len;
        }
        let spec = grid.spectral();
        let symbol = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let k = spec.wavevector(idx);
                let mut s = w_mean;
                for i in 0..n {
                    for j in 0..n {
                        s -= (adj[j * n + i] * ddc_symbol(&k, i, j)).re;
                    }
                }
                // the inverse transform's 1/len is folded in here
                s * len
            })
            .collect();
        Self { symbol }
    }

    fn apply(&self, grid: &TorusGrid, r: &[f64]) -> Vec<f64> {
        let spec = grid.spectral();
        let mut hat = spec.forward_real(r);
        hat.par_iter_mut()
            .zip(self.symbol.par_iter())
            .for_each(|(z, s)| *z /= *s);
        spec.inverse_unnormalized(hat)
            .into_iter()
            .map(|z| z.re)
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG on `W (1 - Δ) h = -W rhs`. Returns the solution and the
/// total iteration count.
fn pcg(
    inv: &InverseMetric,
    rhs: &ScalarField,
    tol: f64,
    max_iters: usize,
) -> Result<(ScalarField, usize)> {
    let grid = inv.grid().clone();
    grid.check_same(rhs.grid())?;
    let rhs_sup = rhs.sup_norm();
    let mut x = ScalarField::zeros(&grid);
    if rhs_sup == 0.0 {
        return Ok((x, 0));
    }
    let target = tol * rhs_sup;
    let w = inv.det();
    let precond = Preconditioner::new(inv);
    let mut total = 0usize;

    // Outer restarts guard against drift between the recursive and the
    // true residual.
    for _restart in 0..4 {
        let true_res = if total == 0 {
            rhs.scale(-1.0)
        } else {
            apply_operator(inv, &x)?.sub(rhs)?
        };
        let true_sup = true_res.sup_norm();
        if true_sup <= target {
            return Ok((x, total));
        }
        // r = W ((Δ - 1) x - rhs) sign-flipped so that B = W (1 - Δ) is SPD:
        // b - B x = W ((Δ - 1) x - rhs)
        let mut r: Vec<f64> = true_res
            .values()
            .iter()
            .zip(w)
            .map(|(a, b)| a * b)
            .collect();
        let mut z = precond.apply(&grid, &r);
        let mut dir = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            let sup = r
                .iter()
                .zip(w)
                .fold(0.0f64, |m, (ri, wi)| m.max((ri / wi).abs()));
            if sup <= 0.5 * target {
                break;
            }
            if total >= max_iters {
                return Err(Error::IterationLimit {
                    iterations: total,
                    residual: sup / rhs_sup,
                });
            }
            let dir_field = ScalarField::from_vec_unchecked(&grid, dir.clone());
            let lap = inv.laplacian(&dir_field)?;
            let bd: Vec<f64> = dir
                .iter()
                .zip(lap.values())
                .zip(w)
                .map(|((d, l), wi)| wi * (d - l))
                .collect();
            let curvature = dot(&dir, &bd);
            if !(curvature > 0.0) {
                return Err(Error::IterationLimit {
                    iterations: total,
                    residual: sup / rhs_sup,
                });
            }
            let alpha = rz / curvature;
            for (xi, di) in x.values_mut().iter_mut().zip(&dir) {
                *xi += alpha * di;
            }
            for (ri, bi) in r.iter_mut().zip(&bd) {
                *ri -= alpha * bi;
            }
            z = precond.apply(&grid, &r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (di, zi) in dir.iter_mut().zip(&z) {
                *di = zi + beta * *di;
            }
            total += 1;
        }
    }
    let res = apply_operator(inv, &x)?.sub(rhs)?.sup_norm();
    if res <= target {
        Ok((x, total))
    } else {
        Err(Error::IterationLimit {
            iterations: total,
            residual: res / rhs_sup,
        })
    }
}

/// Solves `(MA)_t` by damped Newton from `u_init`.
///
/// A starting potential that violates positivity is pulled toward zero by
/// halving before the first step.
pub fn solve_at_t(
    p: &ProblemData,
    t: f64,
    u_init: &ScalarField,
    cfg: &SolverConfig,
) -> Result<ContinuityState> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t must be positive, got {t}"
        )));
    }
    cfg.validate()?;
    p.grid().check_same(u_init.grid())?;

    let mut scale = 1.0;
    let (mut u, mut form, mut phi) = loop {
        let cand = u_init.scale(scale);
        match evaluate(p, t, &cand, cfg.pos_floor) {
            Ok((f, r)) => break (cand, f, r),
            Err(e @ Error::PositivityLost { .. }) => {
                scale *= 0.5;
                if scale < 0.5f64.powi(cfg.max_backtracks as i32) {
                    return Err(e);
                }
            }
            Err(e) => return Err(e),
        }
    };

    let mut trace = Vec::new();
    let mut lambda = 1.0;
    let mut linear_iters = 0;
    for iter in 0.. {
        let r_sup = phi.sup_norm();
        trace.push(NewtonStep {
            iter,
            residual_sup: r_sup,
            lambda,
            linear_iters,
        });
        let inverse = InverseMetric::new(&form)?;
        if r_sup <= cfg.tol {
            return Ok(ContinuityState {
                t,
                u,
                omega_t: form,
                residual_sup: r_sup,
                newton_iters: iter,
                trace,
                inverse,
            });
        }
        if iter >= cfg.max_newton {
            return Err(Error::IterationLimit {
                iterations: iter,
                residual: r_sup,
            });
        }
        let eta = cfg.linear_tol.min(r_sup);
        let (step, its) = pcg(&inverse, &phi.scale(-1.0), eta, cfg.max_linear_iters)?;
        linear_iters = its;

        lambda = 1.0;
        let mut positive_seen = false;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let cand = u.axpy(lambda, &step)?;
            match evaluate(p, t, &cand, cfg.pos_floor) {
                Ok((f, r)) => {
                    positive_seen = true;
                    if r.sup_norm() <= (1.0 - 1e-4 * lambda) * r_sup {
                        accepted = Some((cand, f, r));
                        break;
                    }
                }
                Err(Error::PositivityLost { .. }) => {}
                Err(e) => return Err(e),
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((cand, f, r)) => {
                u = cand;
                form = f;
                phi = r;
            }
            None if positive_seen => {
                return Err(Error::NewtonDiverged { t, residual: r_sup });
            }
            None => {
                let cand = u.axpy(lambda, &step)?;
                let f = p.form_at(t, &cand)?;
                let (min_eig, point) = crate::calculus::min_eigenvalue_with_index(&f);
                return Err(Error::PositivityLost { t, point, min_eig });
            }
        }
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testbed::{perturbed_metric, CosineMode};
    use std::f64::consts::PI;

    fn perturbed_n1(points: usize) -> ProblemData {
        let grid = TorusGrid::new(1, points).unwrap();
        ProblemData::new(perturbed_metric(&grid, &[CosineMode::new(0.005, &[1, 0], 0.0)]).unwrap())
            .unwrap()
    }

    #[test]
    fn flat_residual_vanishes_at_closed_form() {
        for n in [1, 2] {
            let grid = TorusGrid::new(n, 8).unwrap();
            let p = ProblemData::flat(&grid);
            let t: f64 = 0.3;
            let u = ScalarField::constant(&grid, n as f64 * t.ln());
            assert!(residual(&p, t, &u).unwrap().sup_norm() < 1e-15);
            assert!(
                residual(&p, 1.0, &ScalarField::zeros(&grid))
                    .unwrap()
                    .sup_norm()
                    == 0.0
            );
        }
    }

    #[test]
    fn residual_reports_lost_positivity() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let p = ProblemData::flat(&grid);
        let u = ScalarField::from_fn(&grid, |x| 0.5 * (2.0 * PI * x[0]).cos());
        assert!(matches!(
            residual(&p, 1.0, &u),
            Err(Error::PositivityLost { .. })
        ));
    }

    #[test]
    fn linearized_apply_examples() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let p = ProblemData::flat(&grid);
        let s = ContinuityState::from_potential(&p, 1.0, ScalarField::zeros(&grid)).unwrap();
        let c = linearized_apply(&s, &ScalarField::constant(&grid, 2.5)).unwrap();
        assert!(c.values().iter().all(|v| (v + 2.5).abs() < 1e-13));
        let h = ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).cos());
        let out = linearized_apply(&s, &h).unwrap();
        for (o, hv) in out.values().iter().zip(h.values()) {
            assert!((o - (-PI * PI - 1.0) * hv).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_solve_examples() {
        let grid = TorusGrid::new(1, 32).unwrap();
        let p = ProblemData::flat(&grid);
        let s = ContinuityState::from_potential(&p, 1.0, ScalarField::zeros(&grid)).unwrap();
        let h = solve_linear(&s, &ScalarField::constant(&grid, -3.0), 1e-12).unwrap();
        assert!(h.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
        let rhs = ScalarField::from_fn(&grid, |x| (2.0 * PI * x[0]).cos());
        let h = solve_linear(&s, &rhs, 1e-12).unwrap();
        for (hv, r) in h.values().iter().zip(rhs.values()) {
            assert!((hv - r / (-PI * PI - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbed_linear_solve_meets_tolerance() {
        let p = perturbed_n1(32);
        let s = ContinuityState::from_potential(&p, 1.0, ScalarField::zeros(&p.grid().clone()))
            .unwrap();
        let rhs = ScalarField::from_fn(p.grid(), |x| (2.0 * PI * x[0]).sin() + 0.3);
        let h = solve_linear(&s, &rhs, 1e-9).unwrap();
        let res = linearized_apply(&s, &h)
            .unwrap()
            .sub(&rhs)
            .unwrap()
            .sup_norm();
        assert!(res <= 1e-9 * rhs.sup_norm());
    }

    #[test]
    fn nonpositive_t_is_rejected() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let p = ProblemData::flat(&grid);
        for t in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                solve_at_t(&p, t, &ScalarField::zeros(&grid), &SolverConfig::default()),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn flat_solution_is_n_log_t() {
        for n in [1, 2] {
            let grid = TorusGrid::new(n, 8).unwrap();
            let p = ProblemData::flat(&grid);
            for t in [1.0f64, 0.5, 0.1] {
                let s = solve_at_t(&p, t, &ScalarField::zeros(&grid), &SolverConfig::default())
                    .unwrap();
                let exact = n as f64 * t.ln();
                assert!(s.u.values().iter().all(|v| (v - exact).abs() < 1e-10));
            }
        }
    }

    #[test]
    fn perturbed_solve_converges_and_verifies() {
        let p = perturbed_n1(32);
        let cfg = SolverConfig::default();
        let s = solve_at_t(&p, 1.0, &ScalarField::zeros(p.grid()), &cfg).unwrap();
        assert!(residual(&p, 1.0, &s.u).unwrap().sup_norm() <= 2.0 * cfg.tol);
        // ∫ det ω_t = t^n ∫ det ω on the torus
        assert!((s.volume() - p.volume()).abs() < 1e-12);
    }

    #[test]
    fn solution_is_unique_from_different_starts() {
        let p = perturbed_n1(32);
        let cfg = SolverConfig::default();
        let a = solve_at_t(&p, 0.8, &ScalarField::zeros(p.grid()), &cfg).unwrap();
        let init = ScalarField::from_fn(p.grid(), |x| 0.02 * (2.0 * PI * x[1]).sin() - 0.3);
        let b = solve_at_t(&p, 0.8, &init, &cfg).unwrap();
        assert!(a.u.sub(&b.u).unwrap().sup_norm() <= 5.0 * cfg.tol);
    }

    #[test]
    fn infeasible_start_is_damped_toward_zero() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let p = ProblemData::flat(&grid);
        let bad = ScalarField::from_fn(&grid, |x| 0.5 * (2.0 * PI * x[0]).cos());
        let s = solve_at_t(&p, 1.0, &bad, &SolverConfig::default()).unwrap();
        assert!(s.u.sup_norm() < 1e-10);
    }
}
