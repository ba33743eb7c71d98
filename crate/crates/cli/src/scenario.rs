//! Running a scenario and writing its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use cma_core::curvature::{kappa_summary, CurvatureClass};
use cma_core::estimates::{
    check_cheng_yau, state_checks, CurvatureInput, EstimateReport, PathSuite,
};
use cma_core::io::{fmt_f64, write_hermitian_bin, write_scalar_bin};
use cma_core::path::{
    choose_t1, extrapolate_volume, log_log_slope, run_path_with, PathEntry, PathOptions,
    PathSchedule,
};
use cma_core::{solve_at_t, ProblemData, ScalarField};

use crate::config::{ScenarioConfig, T1};
use crate::report::{path_csv, Failure, FitBlock, NewtonTrace, PathSummary, Report};
use crate::synthetic::synthetic_pair;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Solve,
    Path,
    Estimates,
    Curvature,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Path => "path",
            Command::Estimates => "estimates",
            Command::Curvature => "curvature",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Skipped checks count as failures when the curvature hypotheses hold.
    pub strict: bool,
    pub threads: usize,
}

/// Everything a run produces, before it is written out.
#[derive(Debug)]
pub struct Artifacts {
    pub report: Report,
    pub path_csv: Option<String>,
    pub estimates_csv: Option<String>,
    pub curvature_csv: Option<String>,
    /// `(file name, bytes)` for `fields/`.
    pub fields: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(report: Report) -> Self {
        Self {
            report,
            path_csv: None,
            estimates_csv: None,
            curvature_csv: None,
            fields: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.report.exit_code
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let files = [
            ("path.csv", &self.path_csv),
            ("estimates.csv", &self.estimates_csv),
            ("curvature.csv", &self.curvature_csv),
        ];
        for (name, body) in files {
            if let Some(body) = body {
                std::fs::write(dir.join(name), body)?;
            }
        }
        if !self.fields.is_empty() {
            let fdir = dir.join("fields");
            std::fs::create_dir_all(&fdir)?;
            for (name, bytes) in &self.fields {
                std::fs::write(fdir.join(name), bytes)?;
            }
        }
        std::fs::write(dir.join("report.json"), self.report.to_json())
    }
}

/// Where the artifacts go: `--out` wins over the scenario.
pub fn output_dir(flag: Option<&Path>, cfg: Option<&ScenarioConfig>) -> PathBuf {
    match (flag, cfg) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(c)) if c.output.dir.is_absolute() => c.output.dir.clone(),
        (None, Some(c)) => c.base_dir.join(&c.output.dir),
        (None, None) => PathBuf::from("out"),
    }
}

/// Report for a run that never got a valid scenario.
pub fn config_failure(command: &str, message: String, opts: &RunOptions) -> Report {
    let mut r = Report::new(command, None, opts.threads, opts.strict);
    r.failures.push(Failure::new("config", None, None, message));
    r.exit_code = 2;
    r
}

pub fn run(cmd: Command, cfg: &ScenarioConfig, opts: &RunOptions) -> Artifacts {
    let mut art = Artifacts::new(Report::new(
        cmd.as_str(),
        Some(cfg.clone()),
        opts.threads,
        opts.strict,
    ));
    let start = Instant::now();
    let outcome = match cmd {
        Command::Solve => run_solve(cfg, &mut art),
        Command::Path => run_path_cmd(cfg, &mut art),
        Command::Estimates => run_estimates(cfg, &mut art),
        Command::Curvature => run_curvature(cfg, &mut art),
    };
    let skips_fail = match outcome {
        Ok(hypotheses_hold) => opts.strict && hypotheses_hold,
        Err(e) => {
            art.report
                .failures
                .push(Failure::new("error", None, None, e.to_string()));
            false
        }
    };
    art.report
        .timings
        .insert("total_s".into(), start.elapsed().as_secs_f64());
    art.report.finalize(skips_fail);
    art
}

fn timed<T>(art: &mut Artifacts, key: &str, f: impl FnOnce(&mut Artifacts) -> T) -> T {
    let s = Instant::now();
    let out = f(art);
    art.report
        .timings
        .insert(key.into(), s.elapsed().as_secs_f64());
    out
}

fn problem(cfg: &ScenarioConfig) -> anyhow::Result<ProblemData> {
    Ok(ProblemData::new(cfg.metric()?)?)
}

fn curvature_input(
    cfg: &ScenarioConfig,
    p: &ProblemData,
    art: &mut Artifacts,
) -> anyhow::Result<(CurvatureInput, bool)> {
    let k = timed(art, "curvature_s", |_| {
        kappa_summary(&p.omega, cfg.estimates.direction_samples)
    })?;
    art.report.curvature = Some(k.record());
    let hypotheses_hold = k.classification != CurvatureClass::Mixed;
    Ok((CurvatureInput::from_summary(&k), hypotheses_hold))
}

fn resolve_t1(cfg: &ScenarioConfig, p: &ProblemData) -> anyhow::Result<f64> {
    Ok(match cfg.schedule.t1 {
        T1::Auto => choose_t1(p, cfg.schedule.margin)?,
        T1::Value(v) => v,
    })
}

fn scalar_bytes(f: &ScalarField) -> Vec<u8> {
    let mut buf = Vec::new();
    write_scalar_bin(&mut buf, f).expect("writing to memory");
    buf
}

fn newton_trace(state: &cma_core::ContinuityState) -> NewtonTrace {
    NewtonTrace {
        t: state.t,
        steps: state.trace.clone(),
        quadratic_tail: state.quadratic_tail(),
    }
}

fn run_solve(cfg: &ScenarioConfig, art: &mut Artifacts) -> anyhow::Result<bool> {
    let p = problem(cfg)?;
    let (curv, hold) = curvature_input(cfg, &p, art)?;
    let t1 = resolve_t1(cfg, &p)?;
    let t = cfg.schedule.solve_t.unwrap_or(t1);
    let zero = ScalarField::zeros(p.grid());
    let state = match timed(art, "solve_s", |_| solve_at_t(&p, t, &zero, &cfg.solver)) {
        Ok(s) => s,
        Err(e) => {
            art.report
                .failures
                .push(Failure::new("path", None, Some(t), e.to_string()));
            return Ok(hold);
        }
    };
    let entry = PathEntry::from_state(&p, &state)?;
    art.path_csv = Some(path_csv(std::slice::from_ref(&entry), &[]));
    let suite = cfg.estimates.suite();
    let records = timed(art, "estimates_s", |_| {
        state_checks(&p, &state, &curv, &p.reference_form(t1), &suite)
    })?;
    let report = EstimateReport::new(records);
    art.estimates_csv = Some(report.to_csv());
    art.report.set_records(&report);
    art.report.set_newton(vec![newton_trace(&state)]);
    if cfg.output.fields {
        art.fields.push(("u.bin".into(), scalar_bytes(&state.u)));
    }
    Ok(hold)
}

fn run_path_cmd(cfg: &ScenarioConfig, art: &mut Artifacts) -> anyhow::Result<bool> {
    let p = problem(cfg)?;
    let (curv, hold) = curvature_input(cfg, &p, art)?;
    let t1 = resolve_t1(cfg, &p)?;
    let sched = PathSchedule {
        t1,
        t_min: cfg.schedule.t_min,
        ratio: cfg.schedule.ratio,
        min_step_ratio: cfg.schedule.min_step_ratio,
        geometric: cfg.schedule.geometric,
    };
    let suite_cfg = cfg.estimates.suite();
    let mut suite = PathSuite::new(&p, &curv, &suite_cfg, t1);
    let opts = PathOptions {
        compare_cold_start: cfg.estimates.compare_cold_start,
    };
    let mut traces = Vec::new();
    let mut fields = Vec::new();
    if cfg.output.fields {
        let mut buf = Vec::new();
        write_hermitian_bin(&mut buf, &p.omega)?;
        fields.push(("omega.bin".to_string(), buf));
    }
    let path_start = Instant::now();
    let trace = run_path_with(&p, &sched, &cfg.solver, &opts, |s| {
        traces.push(newton_trace(s));
        if cfg.output.fields {
            fields.push((format!("u_{:03}.bin", traces.len() - 1), scalar_bytes(&s.u)));
        }
        suite.on_state(s)
    })?;
    art.report
        .timings
        .insert("path_s".into(), path_start.elapsed().as_secs_f64());
    let report = timed(art, "family_checks_s", |_| suite.finish())?;

    art.path_csv = Some(path_csv(&trace.entries, &trace.failures));
    art.estimates_csv = Some(report.to_csv());
    art.fields = fields;
    art.report.set_records(&report);
    art.report.set_newton(traces);

    let n = p.n();
    art.report.fit = extrapolate_volume(&trace, n).ok().map(|fit| {
        let ts: Vec<f64> = trace.entries.iter().map(|e| e.t).collect();
        let eig: Vec<f64> = trace.entries.iter().map(|e| e.min_eig).collect();
        let s: Vec<f64> = trace.entries.iter().map(|e| e.max_s).collect();
        FitBlock {
            degree: fit.degree,
            coefficients: fit.coefficients,
            intercept: fit.intercept,
            residual_norm: fit.residual_norm,
            expected_leading: trace.reference_volume,
            min_eig_slope: log_log_slope(&ts, &eig),
            max_s_slope: log_log_slope(&ts, &s),
        }
    });
    if !trace.reached_t_min() {
        let mut msg = match &trace.status {
            cma_core::path::PathStatus::StepUnderflow { last_good_t } => {
                format!("step underflow below t = {last_good_t}")
            }
            _ => format!("initial solve at t1 = {t1} failed"),
        };
        if let Some(last) = trace.failures.last() {
            msg.push_str(&format!(" (last error: {})", last.message));
        }
        art.report
            .failures
            .push(Failure::new("path", None, None, msg));
    }
    art.report.path = Some(PathSummary {
        t1,
        t_min: sched.t_min,
        status: trace.status.clone(),
        accepted: trace.entries.len(),
        reference_volume: trace.reference_volume,
        volume_identity_defect: trace.volume_identity_defect(),
        failed_attempts: trace.failures.clone(),
        entries: trace.entries.clone(),
    });
    Ok(hold)
}

/// Randomized `(v, φ)` pairs checked against the Cheng-Yau integral bound.
fn run_estimates(cfg: &ScenarioConfig, art: &mut Artifacts) -> anyhow::Result<bool> {
    let omega = cfg.metric()?;
    let syn = &cfg.estimates.synthetic;
    let tol = cfg.estimates.tolerance;
    let records = timed(art, "estimates_s", |_| -> anyhow::Result<Vec<_>> {
        let mut out = Vec::with_capacity(syn.pairs);
        for k in 0..syn.pairs {
            let seed = cfg.seed.wrapping_add(k as u64);
            let (v, phi) = synthetic_pair(&omega, seed, syn)?;
            out.push(check_cheng_yau(&v, &phi, &omega, &tol)?.with("seed", seed as f64));
        }
        Ok(out)
    })?;
    let report = EstimateReport::new(records);
    art.estimates_csv = Some(report.to_csv());
    art.report.set_records(&report);
    Ok(true)
}

fn run_curvature(cfg: &ScenarioConfig, art: &mut Artifacts) -> anyhow::Result<bool> {
    let omega = cfg.metric()?;
    let k = timed(art, "curvature_s", |_| {
        kappa_summary(&omega, cfg.estimates.direction_samples)
    })?;
    art.report.curvature = Some(k.record());
    let mut csv = String::from("point,sup_H,kappa\n");
    for (i, (h, kap)) in k
        .point_sup
        .values()
        .iter()
        .zip(k.kappa_field.values())
        .enumerate()
    {
        csv.push_str(&format!("{i},{},{}\n", fmt_f64(*h), fmt_f64(*kap)));
    }
    art.curvature_csv = Some(csv);
    if cfg.output.fields {
        art.fields
            .push(("sup_H.bin".into(), scalar_bytes(&k.point_sup)));
        art.fields
            .push(("kappa.bin".into(), scalar_bytes(&k.kappa_field)));
    }
    Ok(k.classification != CurvatureClass::Mixed)
}
