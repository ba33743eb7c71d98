//! Continuation of `(MA)_t` from `t_1` down to `t_min`, warm-starting each
//! solve from the previous potential.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calculus::{min_eigenvalue, trace_s};
use crate::error::{Error, Result};
use crate::grid::{HermitianField, ScalarField};
use crate::solver::{quadratic_tail, solve_at_t, ContinuityState, ProblemData, SolverConfig};

/// Geometric (or linear) schedule for `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSchedule {
    pub t1: f64,
    /// Smallest `t` reached; every `t ∈ [t_min, t1]` should be solvable.
    pub t_min: f64,
    /// Geometric: `t ← ratio·t`. Linear: `t ← t - (1 - ratio)(t1 - t_min)`.
    pub ratio: f64,
    /// Retries stop once the step falls below `min_step_ratio·t`.
    pub min_step_ratio: f64,
    pub geometric: bool,
}

impl PathSchedule {
    pub fn geometric(t1: f64, t_min: f64, ratio: f64) -> Self {
        Self {
            t1,
            t_min,
            ratio,
            min_step_ratio: 1e-3,
            geometric: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min < self.t1) {
            return Err(Error::InvalidArgument(format!(
                "schedule needs 0 < t_min < t1, got t_min = {}, t1 = {}",
                self.t_min, self.t1
            )));
        }
        for (name, r) in [
            ("ratio", self.ratio),
            ("min_step_ratio", self.min_step_ratio),
        ] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0, 1), got {r}"
                )));
            }
        }
        Ok(())
    }

    fn next_t(&self, t: f64) -> f64 {
        let raw = if self.geometric {
            t * self.ratio
        } else {
            t - (1.0 - self.ratio) * (self.t1 - self.t_min)
        };
        raw.max(self.t_min)
    }
}

/// Smallest `t` with `tω + dd^c log ω^n > 0`, by bisection to `1e-6`.
/// Zero when every positive `t` works.
pub fn critical_t(omega: &HermitianField, ddc_ricci: &HermitianField) -> Result<f64> {
    omega.grid().check_same(ddc_ricci.grid())?;
    let positive =
        |t: f64| min_eigenvalue(&omega.lincomb(t, ddc_ricci, 1.0).expect("same grid")) > 0.0;
    if positive(0.0) {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while !positive(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidArgument(
                "no positive t found; ω is not positive".into(),
            ));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `t_1 = margin · max(1, t*)` for explicit forms.
pub fn choose_t1_for_forms(
    omega: &HermitianField,
    ddc_ricci: &HermitianField,
    margin: f64,
) -> Result<f64> {
    if !(margin > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "margin must exceed 1, got {margin}"
        )));
    }
    Ok(margin * critical_t(omega, ddc_ricci)?.max(1.0))
}

/// Starting parameter of the path: always greater than one and large enough
/// that `t_1 ω + dd^c log ω^n` is positive.
pub fn choose_t1(p: &ProblemData, margin: f64) -> Result<f64> {
    choose_t1_for_forms(&p.omega, &p.ddc_ricci, margin)
}

/// Summary of one accepted state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub t: f64,
    pub max_u: f64,
    pub min_u: f64,
    /// `∫ det ω_t dVol`
    pub volume: f64,
    pub max_s: f64,
    pub min_eig: f64,
    pub newton_iters: usize,
    /// Newton count of a cold start (`u = 0`) at the same `t`, when requested.
    pub cold_newton_iters: Option<usize>,
    pub residual_sup: f64,
    pub quadratic_tail: Option<f64>,
}

impl PathEntry {
    pub fn from_state(p: &ProblemData, state: &ContinuityState) -> Result<Self> {
        let s = trace_s(&state.omega_t, &p.omega)?;
        Ok(Self {
            t: state.t,
            max_u: state.u.max(),
            min_u: state.u.min(),
            volume: state.volume(),
            max_s: s.max(),
            min_eig: min_eigenvalue(&state.omega_t),
            newton_iters: state.newton_iters,
            cold_newton_iters: None,
            residual_sup: state.residual_sup,
            quadratic_tail: quadratic_tail(&state.trace),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailedAttempt {
    pub t: f64,
    pub kind: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PathStatus {
    Completed,
    StepUnderflow { last_good_t: f64 },
    InitialSolveFailed,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathTrace {
    /// Accepted entries, `t` strictly decreasing.
    pub entries: Vec<PathEntry>,
    /// Failed solves in the order they happened.
    pub failures: Vec<FailedAttempt>,
    pub status: PathStatus,
    /// `∫ det ω dVol`
    pub reference_volume: f64,
    pub n: usize,
}

impl PathTrace {
    pub fn reached_t_min(&self) -> bool {
        self.status == PathStatus::Completed
    }

    /// Largest `|V(t) - t^n V_ω| / (t^n V_ω)` over the entries.
    pub fn volume_identity_defect(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let expected = e.t.powi(self.n as i32) * self.reference_volume;
                (e.volume - expected).abs() / expected
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Default)]
pub struct PathOptions {
    /// Also solve from `u = 0` at every accepted `t` to record the cold-start
    /// Newton count.
    pub compare_cold_start: bool,
}

pub fn run_path(p: &ProblemData, sched: &PathSchedule, cfg: &SolverConfig) -> Result<PathTrace> {
    run_path_with(p, sched, cfg, &PathOptions::default(), |_| Ok(()))
}

/// Runs the path and hands every accepted state to `on_accept` before moving on.
pub fn run_path_with(
    p: &ProblemData,
    sched: &PathSchedule,
    cfg: &SolverConfig,
    opts: &PathOptions,
    mut on_accept: impl FnMut(&ContinuityState) -> Result<()>,
) -> Result<PathTrace> {
    sched.validate()?;
    cfg.validate()?;
    let grid = p.grid().clone();
    let mut trace = PathTrace {
        entries: Vec::new(),
        failures: Vec::new(),
        status: PathStatus::Completed,
        reference_volume: p.volume(),
        n: p.n(),
    };
    let zero = ScalarField::zeros(&grid);

    let mut accept = |state: &ContinuityState, trace: &mut PathTrace| -> Result<()> {
        let mut entry = PathEntry::from_state(p, state)?;
        if opts.compare_cold_start {
            entry.cold_newton_iters = solve_at_t(p, state.t, &zero, cfg)
                .ok()
                .map(|s| s.newton_iters);
        }
        trace.entries.push(entry);
        on_accept(state)
    };

    let mut current = match solve_at_t(p, sched.t1, &zero, cfg) {
        Ok(s) => s,
        Err(e) => {
            trace.failures.push(FailedAttempt {
                t: sched.t1,
                kind: e.kind(),
                message: e.to_string(),
            });
            trace.status = PathStatus::InitialSolveFailed;
            return Ok(trace);
        }
    };
    accept(&current, &mut trace)?;

    while current.t > sched.t_min {
        let t_prev = current.t;
        let mut attempt = sched.next_t(t_prev);
        loop {
            match solve_at_t(p, attempt, &current.u, cfg) {
                Ok(s) => {
                    current = s;
                    accept(&current, &mut trace)?;
                    break;
                }
                Err(e) => {
                    trace.failures.push(FailedAttempt {
                        t: attempt,
                        kind: e.kind(),
                        message: e.to_string(),
                    });
                    attempt = (t_prev * attempt).sqrt();
                    if t_prev - attempt < sched.min_step_ratio * t_prev {
                        trace.status = PathStatus::StepUnderflow {
                            last_good_t: t_prev,
                        };
                        return Ok(trace);
                    }
                }
            }
        }
    }
    Ok(trace)
}

/// Least-squares polynomial fit of the volume curve `V(t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumeFit {
    pub degree: usize,
    /// `c_0, c_1, ..., c_degree` with `V(t) ≈ Σ c_j t^j`.
    pub coefficients: Vec<f64>,
    /// `c_0`, the estimate of `V(0)`.
    pub intercept: f64,
    /// Euclidean norm of the fit residuals.
    pub residual_norm: f64,
}

impl VolumeFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.coefficients
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + c)
    }
}

/// Fits `V(t)` by a polynomial of the given degree; needs `degree + 2` entries.
pub fn extrapolate_volume(trace: &PathTrace, degree: usize) -> Result<VolumeFit> {
    let m = trace.entries.len();
    if m < degree + 2 {
        return Err(Error::InsufficientData {
            needed: degree + 2,
            have: m,
        });
    }
    let a = DMatrix::from_fn(m, degree + 1, |i, j| trace.entries[i].t.powi(j as i32));
    let b = DVector::from_iterator(m, trace.entries.iter().map(|e| e.volume));
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::InvalidArgument(format!("volume fit failed: {e}")))?;
    let residual_norm = (&a * &c - &b).norm();
    Ok(VolumeFit {
        degree,
        coefficients: c.iter().copied().collect(),
        intercept: c[0],
        residual_norm,
    })
}

/// Least-squares slope of `log y` against `log t`, used to summarize how the
/// closedness proxies (`min_eig`, `max_s`, ...) scale along the path.
pub fn log_log_slope(ts: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(t, y)| **t > 0.0 && **y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}
