//! Running the checkers over the accepted states of a path.

use serde::{Deserialize, Serialize};

use crate::curvature::{KappaSummary, CURVATURE_ZERO_TOL};
use crate::error::Result;
use crate::grid::{HermitianField, ScalarField};
use crate::solver::{ContinuityState, ProblemData};

use super::integral::*;
use super::lemmas::*;
use super::pointwise::*;
use super::record::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Names of the checks to run; empty means all.
    pub checks: Vec<String>,
    pub tolerance: Tolerance,
    pub beta_grid: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            checks: Vec::new(),
            tolerance: Tolerance::default(),
            beta_grid: vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0],
        }
    }
}

impl SuiteConfig {
    pub fn enabled(&self, name: &str) -> bool {
        self.checks.is_empty() || self.checks.iter().any(|c| c == name)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.checks {
            if !ALL_CHECKS.contains(&c.as_str()) {
                return Err(crate::Error::InvalidArgument(format!(
                    "unknown check '{c}'"
                )));
            }
        }
        if self.beta_grid.is_empty() || self.beta_grid.iter().any(|&b| !(b > 0.0)) {
            return Err(crate::Error::InvalidArgument(
                "beta_grid must be a nonempty list of positive numbers".into(),
            ));
        }
        if !(self.tolerance.rel >= 0.0 && self.tolerance.abs >= 0.0) {
            return Err(crate::Error::InvalidArgument(
                "tolerances must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Curvature data of the background metric `ω`.
#[derive(Clone, Debug)]
pub struct CurvatureInput {
    pub sup_h: f64,
    /// Constant for the Schwarz inequality, `-sup_H`.
    pub kappa_const: f64,
    /// Pointwise `max(0, -sup_ξ H)`.
    pub kappa_field: ScalarField,
}

impl CurvatureInput {
    pub fn from_summary(k: &KappaSummary) -> Self {
        Self {
            sup_h: k.sup_h,
            kappa_const: k.kappa_const,
            kappa_field: k.kappa_field.clone(),
        }
    }
}

/// Collects records while a path runs, then adds the family checks.
///
/// `Θ = t₁ ω + dd^c log ω^n` bounds every state from below: for `t <= t₁`,
/// `Θ + dd^c u_t >= ω_t > 0`.
pub struct PathSuite<'a> {
    p: &'a ProblemData,
    curv: &'a CurvatureInput,
    cfg: &'a SuiteConfig,
    theta: HermitianField,
    potentials: Vec<(f64, ScalarField)>,
    records: Vec<CheckRecord>,
}

impl<'a> PathSuite<'a> {
    pub fn new(
        p: &'a ProblemData,
        curv: &'a CurvatureInput,
        cfg: &'a SuiteConfig,
        t1: f64,
    ) -> Self {
        Self {
            p,
            curv,
            cfg,
            theta: p.reference_form(t1),
            potentials: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn theta(&self) -> &HermitianField {
        &self.theta
    }

    /// Runs the single-state checks and keeps `u_t` for the family checks.
    pub fn on_state(&mut self, state: &ContinuityState) -> Result<()> {
        let recs = state_checks(self.p, state, self.curv, &self.theta, self.cfg)?;
        self.records.extend(recs);
        self.potentials.push((state.t, state.u.clone()));
        Ok(())
    }

    pub fn finish(self) -> Result<EstimateReport> {
        let Self {
            p,
            curv,
            cfg,
            theta,
            potentials,
            mut records,
        } = self;
        if potentials.is_empty() {
            return Ok(EstimateReport::new(records));
        }
        let tol = &cfg.tolerance;
        let family: Vec<ScalarField> = potentials.iter().map(|(_, u)| u.clone()).collect();
        let mut constants = None;
        if cfg.enabled(HORMANDER) || cfg.enabled(LOG_COMPACTNESS) || cfg.enabled(HOLDER_LOWER_BOUND)
        {
            let r = check_hormander(&family, &theta, &p.omega, &cfg.beta_grid)?;
            constants = hormander_constants(&r);
            if cfg.enabled(HORMANDER) {
                records.push(r);
            }
        }
        for (t, u) in &potentials {
            if cfg.enabled(LOG_COMPACTNESS) {
                records.push(match constants {
                    Some((beta, c)) => {
                        check_log_compactness(u, &theta, &p.omega, beta, c, tol)?.at_t(*t)
                    }
                    None => {
                        CheckRecord::degenerate(LOG_COMPACTNESS, false, "no integrability exponent")
                            .at_t(*t)
                    }
                });
            }
            if cfg.enabled(HOLDER_LOWER_BOUND) {
                let state = ContinuityState::from_potential(p, *t, u.clone())?;
                records.push(match constants {
                    // ∫ e^{-βu} = e^{-β max u} I(β) <= e^{-β max u} C
                    Some((beta, c)) => {
                        let c_t = (-beta * u.max()).exp() * c;
                        check_holder_lower_bound(p, &state, beta, c_t, tol)?
                    }
                    None => CheckRecord::degenerate(
                        HOLDER_LOWER_BOUND,
                        false,
                        "no integrability exponent",
                    )
                    .at_t(*t),
                });
            }
        }
        if cfg.enabled(LIMINF_MAX_U) {
            let entries: Vec<LiminfEntry> = potentials
                .iter()
                .map(|(t, u)| LiminfEntry::new(p, *t, u, &curv.kappa_field))
                .collect();
            let hyp = curv.sup_h <= CURVATURE_ZERO_TOL;
            records.push(liminf_from_parts(p.n(), &entries, hyp, tol));
        }
        Ok(EstimateReport::new(records))
    }
}

/// The checks that need only one state. Cheng-Yau uses
/// `v = u - max u - 1` and `φ = (tr_ω Θ)_+`, for which `Δ_ω v >= -φ`.
pub fn state_checks(
    p: &ProblemData,
    state: &ContinuityState,
    curv: &CurvatureInput,
    theta: &HermitianField,
    cfg: &SuiteConfig,
) -> Result<Vec<CheckRecord>> {
    let tol = &cfg.tolerance;
    let mut out = Vec::new();
    if cfg.enabled(SCHWARZ) {
        out.push(check_schwarz(p, state, curv.kappa_const, curv.sup_h, tol)?);
    }
    if cfg.enabled(S_UPPER_NEGATIVE) {
        out.push(check_s_upper_negative(
            p,
            state,
            curv.kappa_const,
            curv.sup_h,
            tol,
        )?);
    }
    if cfg.enabled(S_UPPER_NONPOSITIVE) {
        out.push(check_s_upper_nonpositive(p, state, curv.sup_h, tol)?);
    }
    if cfg.enabled(MAX_U) {
        out.push(check_max_u(p, state, tol)?);
    }
    if cfg.enabled(SANDWICH_AND_INF_U) {
        out.push(check_sandwich_and_inf_u(p, state, state.t)?);
    }
    if cfg.enabled(NEWTON_MACLAURIN) {
        out.push(check_newton_maclaurin(p, state, tol)?);
    }
    if cfg.enabled(INTEGRAL_RATIO) {
        out.push(check_integral_ratio(
            p,
            state,
            &curv.kappa_field,
            curv.sup_h,
            tol,
        )?);
    }
    if cfg.enabled(CHENG_YAU) {
        let m = state.u.max();
        let v = state.u.map(|x| x - m - 1.0);
        let phi = crate::calculus::InverseMetric::new(&p.omega)?
            .trace_of(theta)?
            .map(|x| x.max(0.0));
        out.push(check_cheng_yau(&v, &phi, &p.omega, tol)?.at_t(state.t));
    }
    Ok(out)
}
