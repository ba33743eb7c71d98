//! `report.json` and the CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use cma_core::curvature::KappaRecord;
use cma_core::estimates::{CheckRecord, CheckStatus, EstimateReport};
use cma_core::io::fmt_f64;
use cma_core::path::{FailedAttempt, PathEntry, PathStatus};
use cma_core::solver::NewtonStep;
use serde::Serialize;

use crate::config::ScenarioConfig;

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    /// `check`, `path`, `config` or `error`.
    pub kind: String,
    pub name: Option<String>,
    pub t: Option<f64>,
    pub message: String,
}

impl Failure {
    pub fn new(kind: &str, name: Option<&str>, t: Option<f64>, message: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            name: name.map(Into::into),
            t,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CheckSummary {
    pub pass: usize,
    pub fail: usize,
    pub skip: usize,
    /// Smallest margin among records whose hypothesis held.
    pub worst_margin: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathSummary {
    pub t1: f64,
    pub t_min: f64,
    pub status: PathStatus,
    pub accepted: usize,
    pub reference_volume: f64,
    pub volume_identity_defect: f64,
    pub failed_attempts: Vec<FailedAttempt>,
    pub entries: Vec<PathEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitBlock {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub residual_norm: f64,
    /// Expected leading coefficient `∫ det ω dVol`.
    pub expected_leading: f64,
    /// Log-log slopes of the closedness proxies against `t`.
    pub min_eig_slope: Option<f64>,
    pub max_s_slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NewtonTrace {
    pub t: f64,
    pub steps: Vec<NewtonStep>,
    /// `max r_{k+1} / r_k^2` over the last three residuals.
    pub quadratic_tail: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: String,
    pub config: Option<ScenarioConfig>,
    pub threads: usize,
    pub strict: bool,
    pub timings: BTreeMap<String, f64>,
    pub curvature: Option<KappaRecord>,
    pub path: Option<PathSummary>,
    pub fit: Option<FitBlock>,
    pub newton: Vec<NewtonTrace>,
    /// Largest quadratic-tail constant over the Newton traces.
    pub quadratic_tail_max: Option<f64>,
    pub checks: BTreeMap<String, CheckSummary>,
    pub records: Vec<CheckRecord>,
    pub failures: Vec<Failure>,
    pub exit_code: i32,
}

impl Report {
    pub fn new(
        command: &str,
        config: Option<ScenarioConfig>,
        threads: usize,
        strict: bool,
    ) -> Self {
        Self {
            tool: "cma",
            version: env!("CARGO_PKG_VERSION"),
            core_version: cma_core::VERSION,
            command: command.into(),
            config,
            threads,
            strict,
            timings: BTreeMap::new(),
            curvature: None,
            path: None,
            fit: None,
            newton: Vec::new(),
            quadratic_tail_max: None,
            checks: BTreeMap::new(),
            records: Vec::new(),
            failures: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn set_records(&mut self, report: &EstimateReport) {
        self.records = report.records.clone();
        self.checks.clear();
        for r in &report.records {
            let s = self.checks.entry(r.name.clone()).or_default();
            match r.status {
                CheckStatus::Pass => s.pass += 1,
                CheckStatus::Fail => s.fail += 1,
                CheckStatus::Skip => s.skip += 1,
            }
            if r.hypothesis_held && !r.worst_margin.is_nan() {
                s.worst_margin = Some(
                    s.worst_margin
                        .map_or(r.worst_margin, |m| m.min(r.worst_margin)),
                );
            }
        }
    }

    pub fn set_newton(&mut self, traces: Vec<NewtonTrace>) {
        self.quadratic_tail_max = traces
            .iter()
            .filter_map(|t| t.quadratic_tail)
            .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.max(c))));
        self.newton = traces;
    }

    /// Adds a failure for every failed record, and for every skipped one
    /// when `skips_fail` is set. Sets the exit code.
    pub fn finalize(&mut self, skips_fail: bool) {
        let mut extra = Vec::new();
        for r in &self.records {
            let failed =
                r.status == CheckStatus::Fail || (skips_fail && r.status == CheckStatus::Skip);
            if failed {
                let message = match (&r.note, r.status) {
                    (Some(n), CheckStatus::Skip) => format!("skipped under --strict: {n}"),
                    (None, CheckStatus::Skip) => "skipped under --strict".to_string(),
                    (Some(n), _) => format!("margin {:e}: {n}", r.worst_margin),
                    (None, _) => format!("margin {:e} below -{:e}", r.worst_margin, r.tolerance),
                };
                extra.push(Failure::new("check", Some(&r.name), r.t, message));
            }
        }
        self.failures.extend(extra);
        self.exit_code = if self.failures.is_empty() { 0 } else { 1 };
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

pub const PATH_CSV_HEADER: &str = "t,max_u,min_u,volume,max_S,min_eig,newton_iters,status";

/// Accepted entries with status `ok`, then failed attempts with their error kind.
pub fn path_csv(entries: &[PathEntry], failures: &[FailedAttempt]) -> String {
    let mut s = String::from(PATH_CSV_HEADER);
    s.push('\n');
    for e in entries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},ok",
            fmt_f64(e.t),
            fmt_f64(e.max_u),
            fmt_f64(e.min_u),
            fmt_f64(e.volume),
            fmt_f64(e.max_s),
            fmt_f64(e.min_eig),
            e.newton_iters
        );
    }
    for f in failures {
        let _ = writeln!(s, "{},,,,,,,{}", fmt_f64(f.t), f.kind);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(t: f64) -> PathEntry {
        PathEntry {
            t,
            max_u: t.ln(),
            min_u: t.ln(),
            volume: t,
            max_s: 1.0 / t,
            min_eig: t,
            newton_iters: 1,
            cold_newton_iters: None,
            residual_sup: 0.0,
            quadratic_tail: None,
        }
    }

    #[test]
    fn path_csv_layout() {
        let fail = FailedAttempt {
            t: 0.25,
            kind: "positivity_lost",
            message: String::new(),
        };
        let csv = path_csv(&[entry(1.0), entry(0.5)], &[fail]);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], PATH_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1.0000000000000000e0,0.0000000000000000e0,"));
        assert!(lines[1].ends_with(",1,ok"));
        assert_eq!(lines[3], "2.5000000000000000e-1,,,,,,,positivity_lost");
        for l in &lines {
            assert_eq!(l.matches(',').count(), 7);
        }
    }

    #[test]
    fn summaries_and_exit_code() {
        use cma_core::estimates::CheckRecord;
        let recs = vec![
            CheckRecord::new("max_u", true, 0.5, None, 1e-10).at_t(1.0),
            CheckRecord::new("max_u", true, -1.0, Some(3), 1e-10).at_t(0.5),
            CheckRecord::new("schwarz", false, 0.0, None, 1e-10).at_t(0.5),
        ];
        let mut r = Report::new("path", None, 1, false);
        r.set_records(&EstimateReport::new(recs));
        assert_eq!(r.checks["max_u"].pass, 1);
        assert_eq!(r.checks["max_u"].fail, 1);
        assert_eq!(r.checks["max_u"].worst_margin, Some(-1.0));
        assert_eq!(r.checks["schwarz"].worst_margin, None);
        let mut strict = r.clone();
        r.finalize(false);
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.exit_code, 1);
        strict.finalize(true);
        assert_eq!(strict.failures.len(), 2);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["failures"][0]["name"], "max_u");
    }
}
