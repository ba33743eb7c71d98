//! Pointwise estimates on a single solution `u_t`: the Schwarz inequality,
//! the two bounds on `S`, the maximum principle bound on `u_t`, the metric
//! sandwich and the Newton-Maclaurin inequality.

use crate::calculus::{log_ratio_det, relative_eigen_range, trace_s};
use crate::curvature::CURVATURE_ZERO_TOL;
use crate::error::Result;
use crate::hermitian;
use crate::solver::{ContinuityState, ProblemData};

use super::record::*;

/// Smallest value and its index; NaN counts as the most violating value.
pub(crate) fn min_at(values: &[f64]) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            return (f64::NAN, i);
        }
        if v < best.0 {
            best = (v, i);
        }
    }
    best
}

fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Whether `H <= -κ` is available for the Schwarz inequality. In dimension
/// two the curvature step also needs `κ >= 0`.
pub fn schwarz_hypothesis(n: usize, kappa: f64, sup_h: f64) -> bool {
    sup_h <= -kappa + CURVATURE_ZERO_TOL && (n == 1 || kappa >= -CURVATURE_ZERO_TOL)
}

/// Roundoff multiplier for quantities built from two nested second derivatives.
pub const NESTED_ROUNDOFF_FACTOR: f64 = 8.0;

/// `Δ' log S >= (t/n + (n+1)κ/(2n)) S - 1` from the Laplacian of `log S`
/// with respect to `ω_t` and `S` itself. `gain` is the grid's
/// [`spectral_gain`](crate::TorusGrid::spectral_gain); `Δ' log S` carries
/// fourth derivatives of `u`, so the tolerance is at least `8 ε gain^2` times
/// the field scale.
#[allow(clippy::too_many_arguments)]
pub fn schwarz_from_parts(
    n: usize,
    t: f64,
    kappa: f64,
    hypothesis_held: bool,
    lap_log_s: &[f64],
    s: &[f64],
    gain: f64,
    tol: &Tolerance,
) -> CheckRecord {
    if s.iter().any(|&v| !(v > 0.0)) {
        return CheckRecord::degenerate(SCHWARZ, hypothesis_held, "S has nonpositive values")
            .at_t(t)
            .with("kappa", kappa);
    }
    let nf = n as f64;
    let c = t / nf + (nf + 1.0) * kappa / (2.0 * nf);
    let rhs: Vec<f64> = s.iter().map(|&sv| c * sv - 1.0).collect();
    let margins: Vec<f64> = lap_log_s.iter().zip(&rhs).map(|(l, r)| l - r).collect();
    let (m, at) = min_at(&margins);
    let scale = 1f64.max(sup_abs(lap_log_s)).max(sup_abs(&rhs) + 1.0);
    let floor = NESTED_ROUNDOFF_FACTOR * f64::EPSILON * gain * gain * scale;
    CheckRecord::new(
        SCHWARZ,
        hypothesis_held,
        m,
        Some(at),
        tol.effective(scale).max(floor),
    )
    .at_t(t)
    .with("kappa", kappa)
    .with("coefficient", c)
}

pub fn check_schwarz(
    p: &ProblemData,
    state: &ContinuityState,
    kappa: f64,
    sup_h: f64,
    tol: &Tolerance,
) -> Result<CheckRecord> {
    let s = trace_s(&state.omega_t, &p.omega)?;
    let hyp = schwarz_hypothesis(p.n(), kappa, sup_h);
    let gain = p.grid().spectral_gain();
    if s.values().iter().any(|&v| !(v > 0.0)) {
        return Ok(schwarz_from_parts(
            p.n(),
            state.t,
            kappa,
            hyp,
            &[],
            s.values(),
            gain,
            tol,
        ));
    }
    let lap = state.inverse_metric().laplacian(&s.map(f64::ln))?;
    Ok(schwarz_from_parts(
        p.n(),
        state.t,
        kappa,
        hyp,
        lap.values(),
        s.values(),
        gain,
        tol,
    )
    .with("sup_H", sup_h))
}

/// `max S <= 2n / (κ (n+1))`, available only for `κ > 0`.
pub fn s_upper_negative_from_parts(
    n: usize,
    kappa: f64,
    hypothesis_held: bool,
    s: &[f64],
    tol: &Tolerance,
) -> CheckRecord {
    let nf = n as f64;
    if !(kappa > 0.0) {
        return CheckRecord::degenerate(S_UPPER_NEGATIVE, false, "requires kappa > 0")
            .with("kappa", kappa);
    }
    let bound = 2.0 * nf / (kappa * (nf + 1.0));
    let margins: Vec<f64> = s.iter().map(|v| bound - v).collect();
    let (m, at) = min_at(&margins);
    CheckRecord::new(
        S_UPPER_NEGATIVE,
        hypothesis_held,
        m,
        Some(at),
        tol.effective(bound),
    )
    .with("kappa", kappa)
    .with("bound", bound)
}

pub fn check_s_upper_negative(
    p: &ProblemData,
    state: &ContinuityState,
    kappa: f64,
    sup_h: f64,
    tol: &Tolerance,
) -> Result<CheckRecord> {
    let s = trace_s(&state.omega_t, &p.omega)?;
    let hyp = sup_h <= -kappa + CURVATURE_ZERO_TOL;
    Ok(
        s_upper_negative_from_parts(p.n(), kappa, hyp, s.values(), tol)
            .at_t(state.t)
            .with("max_S", s.max()),
    )
}

/// `max S <= n / t` under `H <= 0`.
pub fn s_upper_nonpositive_from_parts(
    n: usize,
    t: f64,
    hypothesis_held: bool,
    s: &[f64],
    tol: &Tolerance,
) -> CheckRecord {
    let bound = n as f64 / t;
    let margins: Vec<f64> = s.iter().map(|v| bound - v).collect();
    let (m, at) = min_at(&margins);
    CheckRecord::new(
        S_UPPER_NONPOSITIVE,
        hypothesis_held,
        m,
        Some(at),
        tol.effective(bound),
    )
    .at_t(t)
    .with("bound", bound)
}

pub fn check_s_upper_nonpositive(
    p: &ProblemData,
    state: &ContinuityState,
    sup_h: f64,
    tol: &Tolerance,
) -> Result<CheckRecord> {
    let s = trace_s(&state.omega_t, &p.omega)?;
    let hyp = sup_h <= CURVATURE_ZERO_TOL;
    Ok(
        s_upper_nonpositive_from_parts(p.n(), state.t, hyp, s.values(), tol)
            .with("max_S", s.max())
            .with("sup_H", sup_h),
    )
}

/// `max u <= C`.
pub fn max_u_from_parts(c: f64, u: &[f64], tol: &Tolerance) -> CheckRecord {
    let (neg_max, at) = min_at(&u.iter().map(|v| -v).collect::<Vec<_>>());
    let max_u = -neg_max;
    CheckRecord::new(MAX_U, true, c - max_u, Some(at), tol.effective(1f64.max(c)))
        .with("C", c)
        .with("max_u", max_u)
}

/// `C` is the largest `log det(tω + dd^c log ω^n) / det ω` over points where
/// that form is positive; a maximum of `u_t` can only sit at such a point.
pub fn check_max_u(
    p: &ProblemData,
    state: &ContinuityState,
    tol: &Tolerance,
) -> Result<CheckRecord> {
    let n = p.n();
    let reference = p.reference_form(state.t);
    let mut c = f64::NEG_INFINITY;
    for (m, w) in reference.matrices().zip(p.omega.matrices()) {
        if hermitian::min_eig(m, n) > 0.0 {
            c = c.max((hermitian::det(m, n) / hermitian::det(w, n)).ln());
        }
    }
    if c == f64::NEG_INFINITY {
        return Ok(
            CheckRecord::degenerate(MAX_U, false, "reference form is nowhere positive")
                .at_t(state.t),
        );
    }
    Ok(max_u_from_parts(c, state.u.values(), tol).at_t(state.t))
}

/// Constants of `c_low t₂ ω <= ω_t <= c_high t₂^{1-n} ω` and
/// `inf u_t >= c_inf log t₂`, from the extreme relative eigenvalues.
pub fn sandwich_from_parts(n: usize, t2: f64, lo: &[f64], hi: &[f64], u: &[f64]) -> CheckRecord {
    let (lo_min, lo_at) = min_at(lo);
    let hi_max = hi.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let (u_min, _) = min_at(u);
    let c_low = lo_min / t2;
    let c_high = hi_max * t2.powi(n as i32 - 1);
    let log_t2 = t2.ln();
    let c_inf = if log_t2 == 0.0 {
        f64::NAN
    } else {
        u_min / log_t2
    };
    let margin = c_low.min(c_high);
    let ok = margin.is_finite() && (log_t2 == 0.0 || c_inf.is_finite());
    let mut r = CheckRecord::new(SANDWICH_AND_INF_U, true, margin, Some(lo_at), 0.0)
        .with("t2", t2)
        .with("c_low", c_low)
        .with("c_high", c_high)
        .with("inf_u", u_min);
    if c_inf.is_finite() {
        r = r.with("c_inf", c_inf);
    }
    r = r.require(ok, "non-finite constant");
    if r.passed() && margin == 0.0 {
        r = r.require(false, "sandwich constant vanishes");
    }
    r
}

/// Uses `t₂ = t`, so the constants measure the state against its own time.
pub fn check_sandwich_and_inf_u(
    p: &ProblemData,
    state: &ContinuityState,
    t2: f64,
) -> Result<CheckRecord> {
    let (lo, hi) = relative_eigen_range(&state.omega_t, &p.omega)?;
    Ok(sandwich_from_parts(p.n(), t2, lo.values(), hi.values(), state.u.values()).at_t(state.t))
}

/// `S >= n e^{-u/n}` pointwise.
pub fn newton_maclaurin_from_parts(n: usize, s: &[f64], u: &[f64], tol: &Tolerance) -> CheckRecord {
    let nf = n as f64;
    let margins: Vec<f64> = s
        .iter()
        .zip(u)
        .map(|(sv, uv)| sv - nf * (-uv / nf).exp())
        .collect();
    let (m, at) = min_at(&margins);
    CheckRecord::new(
        NEWTON_MACLAURIN,
        true,
        m,
        Some(at),
        tol.effective(1f64.max(sup_abs(s))),
    )
    .with("max_abs_gap", sup_abs(&margins))
}

/// Also records `exact_gap`, the same inequality with `σ_n` taken from the
/// determinant ratio instead of `e^u`.
pub fn check_newton_maclaurin(
    p: &ProblemData,
    state: &ContinuityState,
    tol: &Tolerance,
) -> Result<CheckRecord> {
    let n = p.n() as f64;
    let s = trace_s(&state.omega_t, &p.omega)?;
    let log_sigma = log_ratio_det(&state.omega_t, &p.omega)?;
    let exact: Vec<f64> = s
        .values()
        .iter()
        .zip(log_sigma.values())
        .map(|(sv, ls)| sv - n * (-ls / n).exp())
        .collect();
    let (exact_min, _) = min_at(&exact);
    Ok(
        newton_maclaurin_from_parts(p.n(), s.values(), state.u.values(), tol)
            .at_t(state.t)
            .with("exact_gap", exact_min)
            .with("exact_max_abs_gap", sup_abs(&exact)),
    )
}
