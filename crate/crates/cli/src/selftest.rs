//! A fast in-process smoke suite. The full acceptance run lives in the
//! `acceptance` test target.

use std::path::Path;

use cma_core::estimates::{check_max_u, check_newton_maclaurin, check_schwarz, Tolerance};
use cma_core::{solve_at_t, HermitianField, ProblemData, ScalarField, TorusGrid};

use crate::config::parse_config;
use crate::scenario::{run, Command, RunOptions};

type Case = fn() -> anyhow::Result<(bool, String)>;

pub struct SelfTestLine {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn flat_closed_form() -> anyhow::Result<(bool, String)> {
    let mut worst = 0.0f64;
    for n in [1, 2] {
        let grid = TorusGrid::new(n, 16)?;
        let p = ProblemData::new(HermitianField::identity(&grid))?;
        for t in [1.0, 0.5, 0.1] {
            let s = solve_at_t(&p, t, &ScalarField::zeros(&grid), &Default::default())?;
            let exact = n as f64 * f64::ln(t);
            worst = worst.max(
                s.u.values()
                    .iter()
                    .map(|u| (u - exact).abs())
                    .fold(0.0, f64::max),
            );
        }
    }
    Ok((worst <= 1e-10, format!("sup error {worst:.2e}")))
}

fn flat_equality_cases() -> anyhow::Result<(bool, String)> {
    let grid = TorusGrid::new(1, 16)?;
    let p = ProblemData::new(HermitianField::identity(&grid))?;
    let tol = Tolerance::default();
    let mut worst = 0.0f64;
    for t in [1.0, 0.3] {
        let s = solve_at_t(&p, t, &ScalarField::zeros(&grid), &Default::default())?;
        for r in [
            check_schwarz(&p, &s, 0.0, 0.0, &tol)?,
            check_max_u(&p, &s, &tol)?,
            check_newton_maclaurin(&p, &s, &tol)?,
        ] {
            if !r.passed() {
                return Ok((false, format!("{} failed at t = {t}", r.name)));
            }
            worst = worst.max(r.worst_margin.abs());
        }
    }
    Ok((worst <= 1e-10, format!("largest |margin| {worst:.2e}")))
}

const PERTURBED: &str = r#"
seed = 3
[grid]
n = 1
points = 32
[metric]
kind = "perturbed"
modes = [ { amplitude = 0.004, frequency = [1, 0] }, { amplitude = 0.002, frequency = [1, 1], phase = 0.3 } ]
[schedule]
t_min = 0.1
"#;

fn perturbed_path() -> anyhow::Result<(bool, String)> {
    let cfg = parse_config(PERTURBED, Path::new("."))?;
    let a = run(Command::Path, &cfg, &RunOptions::default());
    let b = run(Command::Path, &cfg, &RunOptions::default());
    let path = a
        .report
        .path
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("no path summary"))?;
    let same = a.path_csv == b.path_csv && a.estimates_csv == b.estimates_csv;
    let ok = a.exit_code() == 0 && path.volume_identity_defect <= 1e-8 && same;
    Ok((
        ok,
        format!(
            "exit {}, volume defect {:.2e}, repeatable {same}",
            a.exit_code(),
            path.volume_identity_defect
        ),
    ))
}

fn cheng_yau_pairs() -> anyhow::Result<(bool, String)> {
    let cfg = parse_config(
        "[grid]\nn = 1\npoints = 64\n[schedule]\nt_min = 0.1\n",
        Path::new("."),
    )?;
    let a = run(Command::Estimates, &cfg, &RunOptions::default());
    let pass = a.report.checks.get("cheng_yau").map_or(0, |c| c.pass);
    Ok((
        a.exit_code() == 0 && pass == 20,
        format!("{pass}/20 pairs pass"),
    ))
}

pub fn run_selftest() -> Vec<SelfTestLine> {
    let cases: [(&'static str, Case); 4] = [
        ("flat_closed_form", flat_closed_form),
        ("flat_equality_cases", flat_equality_cases),
        ("perturbed_path", perturbed_path),
        ("cheng_yau_pairs", cheng_yau_pairs),
    ];
    cases
        .into_iter()
        .map(|(name, f)| match f() {
            Ok((passed, detail)) => SelfTestLine {
                name,
                passed,
                detail,
            },
            Err(e) => SelfTestLine {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}
