//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command as Proc;
use std::time::Instant;

use cma_cli::config::{parse_config, ScenarioConfig};
use cma_cli::report::Report;
use cma_cli::scenario::{run, Artifacts, Command, RunOptions};
use cma_cli::synthetic::synthetic_pair;
use cma_core::estimates::*;
use cma_core::path::choose_t1;
use cma_core::testbed::{
    cosine_potential, hessian_bound, perturbed_metric, random_modes, CosineMode,
};
use cma_core::{
    min_eigenvalue, solve_at_t, ContinuityState, HermitianField, ProblemData, ScalarField,
    SolverConfig, TorusGrid,
};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = anyhow::Result<(bool, String)>;

fn scenario_text(n: usize, points: usize, metric: &str, t_min: f64) -> String {
    format!("seed = 1\n[grid]\nn = {n}\npoints = {points}\n{metric}\n[schedule]\nt_min = {t_min}\nratio = 0.6\n")
}

const PERTURBED_N1: &str = "[metric]\nkind = \"perturbed\"\nmodes = [ { amplitude = 0.004, frequency = [1, 0] }, { amplitude = 0.002, frequency = [1, 1], phase = 0.3 } ]";
const PERTURBED_N2: &str = "[metric]\nkind = \"perturbed\"\nmodes = [ { amplitude = 0.004, frequency = [1, 0, 0, 0] }, { amplitude = 0.002, frequency = [0, 1, 1, 0], phase = 0.3 } ]";

/// The path runs shared by several criteria.
struct Runs {
    flat_n1: Artifacts,
    flat_n2: Artifacts,
    pert_n1: Artifacts,
    pert_n2: Artifacts,
    pert_n1_secs: f64,
}

impl Runs {
    fn all(&self) -> [(&'static str, &Report); 4] {
        [
            ("flat n=1", &self.flat_n1.report),
            ("flat n=2", &self.flat_n2.report),
            ("perturbed n=1", &self.pert_n1.report),
            ("perturbed n=2", &self.pert_n2.report),
        ]
    }

    fn perturbed(&self) -> [(&'static str, &Report); 2] {
        [
            ("perturbed n=1", &self.pert_n1.report),
            ("perturbed n=2", &self.pert_n2.report),
        ]
    }
}

fn cfg(text: &str) -> ScenarioConfig {
    parse_config(text, Path::new(".")).expect("built-in scenario")
}

fn path_run(text: &str) -> (Artifacts, f64) {
    let start = Instant::now();
    let art = run(Command::Path, &cfg(text), &RunOptions::default());
    (art, start.elapsed().as_secs_f64())
}

fn records<'a>(r: &'a Report, name: &'a str) -> impl Iterator<Item = &'a CheckRecord> + 'a {
    r.records.iter().filter(move |x| x.name == name)
}

fn flat_state(n: usize, points: usize, t: f64) -> anyhow::Result<(ProblemData, ContinuityState)> {
    let grid = TorusGrid::new(n, points)?;
    let p = ProblemData::new(HermitianField::identity(&grid))?;
    let s = solve_at_t(&p, t, &ScalarField::zeros(&grid), &SolverConfig::default())?;
    Ok((p, s))
}

fn c1_flat_closed_form() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in [1usize, 2] {
        for t in [1.0, 0.5, 0.1] {
            let (_, s) = flat_state(n, 32, t)?;
            let exact = n as f64 * f64::ln(t);
            worst = worst.max(
                s.u.values()
                    .iter()
                    .fold(0.0, |m, u| m.max((u - exact).abs())),
            );
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-10 && secs < 5.0,
        format!("sup error {worst:.2e}, {secs:.2} s"),
    ))
}

fn c2_dense_oracle() -> Outcome {
    let start = Instant::now();
    let grid = TorusGrid::new(1, 8)?;
    let d = common::NaiveDft { points: 8 }.ddc_matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let modes = random_modes(&mut rng, 2, 3, 2, 0.0015);
        let p = ProblemData::new(perturbed_metric(&grid, &modes)?)?;
        let t = choose_t1(&p, 1.2)?;
        let s = solve_at_t(&p, t, &ScalarField::zeros(&grid), &SolverConfig::default())?;
        let g = DVector::from_iterator(grid.len(), p.omega.matrices().map(|m| m[0].re));
        let u = common::dense_newton(&d, &g, t, 1e-12);
        worst =
            s.u.values()
                .iter()
                .zip(u.iter())
                .fold(worst, |m, (a, b)| m.max((a - b).abs()));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-6 && secs < 30.0,
        format!("sup difference {worst:.2e} over 5 metrics, {secs:.2} s"),
    ))
}

fn c3_volume_identity(runs: &Runs) -> Outcome {
    let mut worst = 0.0f64;
    let mut entries = 0;
    let mut ok = true;
    for (_, r) in runs.all() {
        let path = r
            .path
            .as_ref()
            .ok_or_else(|| anyhow::anyhow!("missing path"))?;
        ok &= r.failures.iter().all(|f| f.kind != "path");
        worst = worst.max(path.volume_identity_defect);
        entries += path.accepted;
    }
    let secs = runs.pert_n1_secs;
    Ok((
        ok && worst <= 1e-8 && secs < 60.0,
        format!(
            "max relative defect {worst:.2e} over {entries} entries, n=1 N=64 path {secs:.2} s"
        ),
    ))
}

fn c4_quadratic_tail(runs: &Runs) -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for (name, r) in runs.perturbed() {
        let json: serde_json::Value = serde_json::from_str(&r.to_json())?;
        let recorded = json["quadratic_tail_max"].as_f64();
        ok &= recorded.is_some();
        let c = recorded.unwrap_or(f64::INFINITY);
        ok &= r
            .newton
            .iter()
            .all(|t| t.quadratic_tail.is_none_or(|q| q < 1e3));
        if !(c < 1e3) {
            return Ok((false, format!("{name}: C_q = {c:e}")));
        }
        worst = worst.max(c);
    }
    Ok((
        ok,
        format!("largest C_q {worst:.3e} (recorded in report.json)"),
    ))
}

fn c5_schwarz(runs: &Runs) -> Outcome {
    let tol = Tolerance::default();
    let mut worst = 0.0f64;
    for n in [1usize, 2] {
        for t in [1.0, 0.5, 0.1] {
            let (p, s) = flat_state(n, 16, t)?;
            let r = check_schwarz(&p, &s, 0.0, 0.0, &tol)?;
            if !r.passed() {
                return Ok((false, format!("flat n={n} t={t} did not pass")));
            }
            worst = worst.max(r.worst_margin.abs());
        }
    }
    let (mut held, mut gated) = (0, 0);
    for (name, r) in runs.perturbed() {
        for rec in records(r, SCHWARZ) {
            if rec.hypothesis_held {
                held += 1;
                if !rec.passed() {
                    return Ok((false, format!("{name}: fails at t = {:?}", rec.t)));
                }
            } else {
                gated += 1;
                if rec.status != CheckStatus::Skip
                    || !rec.worst_margin.is_finite()
                    || rec.value("sup_H").is_none()
                {
                    return Ok((false, format!("{name}: ungated record at t = {:?}", rec.t)));
                }
            }
        }
    }
    Ok((
        worst <= 1e-10 && held > 0 && gated > 0,
        format!("flat |margin| <= {worst:.2e}; perturbed: {held} hypothesis-held passes, {gated} gated skips"),
    ))
}

fn c6_max_u(runs: &Runs) -> Outcome {
    let mut count = 0;
    for (name, r) in runs.all() {
        for rec in records(r, MAX_U) {
            count += 1;
            if !rec.passed() || !rec.value("C").is_some_and(f64::is_finite) {
                return Ok((false, format!("{name}: {rec:?}")));
            }
        }
    }
    let mut flat = 0.0f64;
    for (_, r) in &runs.all()[..2] {
        flat = records(r, MAX_U).fold(flat, |m, x| m.max(x.worst_margin.abs()));
    }
    Ok((
        flat <= 1e-10 && count > 0,
        format!("{count} states pass, flat |margin| <= {flat:.2e}"),
    ))
}

fn c7_newton_maclaurin(runs: &Runs) -> Outcome {
    let mut count = 0;
    let mut worst = f64::INFINITY;
    let mut eq = 0.0f64;
    for (name, r) in runs.all() {
        let n1 = name.ends_with("n=1");
        for rec in records(r, NEWTON_MACLAURIN) {
            count += 1;
            worst = worst.min(rec.worst_margin);
            if !(rec.worst_margin >= -1e-8) {
                return Ok((false, format!("{name}: margin {:e}", rec.worst_margin)));
            }
            if n1 {
                eq = eq.max(rec.value("exact_max_abs_gap").unwrap_or(f64::INFINITY));
            }
        }
    }
    Ok((
        count > 0 && eq <= 1e-12,
        format!("{count} states, min margin {worst:.2e}, n=1 equality gap {eq:.2e}"),
    ))
}

fn c8_cheng_yau() -> Outcome {
    let start = Instant::now();
    let tol = Tolerance::default();
    let syn = cma_cli::config::SyntheticSection::default();
    let g1 = TorusGrid::new(1, 64)?;
    let omega1 = perturbed_metric(
        &g1,
        &[
            CosineMode::new(0.004, &[1, 0], 0.0),
            CosineMode::new(0.002, &[1, 1], 0.3),
        ],
    )?;
    let g2 = TorusGrid::new(2, 16)?;
    let omega2 = perturbed_metric(&g2, &[CosineMode::new(0.004, &[1, 0, 0, 0], 0.0)])?;
    let syn2 = cma_cli::config::SyntheticSection {
        max_freq: 1,
        ..syn.clone()
    };
    let mut worst_id = 0.0f64;
    let mut passed = 0;
    for seed in 0..20u64 {
        let (omega, s) = if seed < 14 {
            (&omega1, &syn)
        } else {
            (&omega2, &syn2)
        };
        let (v, phi) = synthetic_pair(omega, seed, s)?;
        let r = check_cheng_yau(&v, &phi, omega, &tol)?;
        worst_id = worst_id.max(r.value("identity_defect").unwrap_or(f64::INFINITY));
        if r.hypothesis_held && r.passed() {
            passed += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        passed == 20 && worst_id <= 1e-8 && secs < 20.0,
        format!("{passed}/20 pairs pass, identity defect {worst_id:.2e}, {secs:.2} s"),
    ))
}

fn c9_log_compactness() -> Outcome {
    let tol = Tolerance::default();
    let mut lines = Vec::new();
    let mut ok = true;
    for (n, points, modes) in [
        (
            1usize,
            64usize,
            vec![
                CosineMode::new(0.004, &[1, 0], 0.0),
                CosineMode::new(0.002, &[1, 1], 0.3),
            ],
        ),
        (2, 16, vec![CosineMode::new(0.004, &[1, 0, 0, 0], 0.0)]),
    ] {
        let grid = TorusGrid::new(n, points)?;
        let p = ProblemData::new(perturbed_metric(&grid, &modes)?)?;
        let theta = p.reference_form(choose_t1(&p, 1.1)?);
        let mut rng = ChaCha8Rng::seed_from_u64(9 + n as u64);
        let mut phi_modes = random_modes(&mut rng, grid.real_dims(), 3, 1, 1.0);
        let scale = 0.9 * min_eigenvalue(&theta) / hessian_bound(&phi_modes);
        for m in &mut phi_modes {
            m.amplitude *= scale;
        }
        let phi = cosine_potential(&grid, &phi_modes)?;
        let family: Vec<ScalarField> = (0..=10).map(|k| phi.scale(k as f64 / 10.0)).collect();
        let horm = check_hormander(&family, &theta, &p.omega, &SuiteConfig::default().beta_grid)?;
        let Some((beta, c_horm)) = hormander_constants(&horm) else {
            return Ok((false, format!("n={n}: no integrability exponent")));
        };
        let big_n = minimal_power(beta);
        for u in &family {
            let r = check_log_compactness(u, &theta, &p.omega, beta, c_horm, &tol)?;
            let c = r.value("C").unwrap_or(f64::NAN);
            let l2 = r.value("l2_integral").unwrap_or(f64::NAN);
            let grad = r.value("gradient_integral").unwrap_or(f64::NAN);
            ok &= r.hypothesis_held && r.passed() && l2 <= c && grad <= c;
            ok &= r.value("N") == Some(big_n as f64) && big_n as f64 * beta >= 2.0;
        }
        lines.push(format!("n={n}: beta0 = {beta}, N = {big_n}"));
    }
    Ok((ok, format!("11-member families pass; {}", lines.join("; "))))
}

fn c10_holder(runs: &Runs) -> Outcome {
    let tol = Tolerance::default();
    let mut count = 0;
    let mut worst = f64::INFINITY;
    for (name, r) in runs.all() {
        for rec in records(r, HOLDER_LOWER_BOUND) {
            count += 1;
            let m = rec.value("holder_margin").unwrap_or(f64::NAN);
            worst = worst.min(m);
            if !(m >= -1e-12) {
                return Ok((false, format!("{name}: Hölder margin {m:e}")));
            }
        }
    }
    let mut eq = 0.0f64;
    let beta = 0.3;
    for n in [1usize, 2] {
        for t in [1.0f64, 0.5, 0.1] {
            let (p, s) = flat_state(n, 16, t)?;
            let a = s.u.values().iter().map(|u| (-beta * u).exp()).sum::<f64>()
                * p.grid().cell_volume();
            let r = check_holder_lower_bound(&p, &s, beta, a, &tol)?;
            if !r.passed() {
                return Ok((false, format!("flat n={n} t={t} did not pass")));
            }
            eq = eq.max(r.worst_margin.abs());
        }
    }
    Ok((
        count > 0 && eq <= 1e-10,
        format!("{count} path states, min Hölder margin {worst:.2e}; flat equality {eq:.2e}"),
    ))
}

/// Every checker: passes on its equality case, fails on a violated input.
fn c11_detectors() -> Outcome {
    let tol = Tolerance::default();
    let grid = TorusGrid::new(1, 16)?;
    let flat = ProblemData::new(HermitianField::identity(&grid))?;
    let t: f64 = 0.5;
    let u_exact = ScalarField::constant(&grid, t.ln());
    let state = ContinuityState::from_potential(&flat, t, u_exact.clone())?;
    let shifted = ContinuityState::from_potential(&flat, t, u_exact.shift(1.0))?;
    let (n2, t2) = (2usize, 0.5);
    let s2 = vec![n2 as f64 / t2; 8];
    let kappa2 = 2.0 * t2 / 3.0;
    let mut inflated = s2.clone();
    inflated[3] += 0.5;
    let k_eq = ScalarField::constant(&grid, 2.0 * t / 2.0);
    let k_bad = ScalarField::constant(&grid, 1.0);
    let a = (-0.3 * t.ln()).exp();
    let neg_one = ScalarField::constant(&grid, -1.0);
    let zero = ScalarField::zeros(&grid);
    let one_family = [ScalarField::constant(&grid, 2.0)];

    let cases: Vec<(&str, CheckRecord, CheckRecord)> = vec![
        (
            SCHWARZ,
            check_schwarz(&flat, &state, 0.0, 0.0, &tol)?,
            schwarz_from_parts(1, 0.5, 0.0, true, &[0.0, -0.1], &[2.0, 2.0], 1e3, &tol),
        ),
        (
            S_UPPER_NEGATIVE,
            s_upper_negative_from_parts(n2, kappa2, true, &s2, &tol),
            s_upper_negative_from_parts(n2, kappa2, true, &inflated, &tol),
        ),
        (
            S_UPPER_NONPOSITIVE,
            check_s_upper_nonpositive(&flat, &state, 0.0, &tol)?,
            s_upper_nonpositive_from_parts(1, 0.25, true, &[4.0, 4.0 + 1e-6], &tol),
        ),
        (
            MAX_U,
            check_max_u(&flat, &state, &tol)?,
            check_max_u(&flat, &shifted, &tol)?,
        ),
        (
            SANDWICH_AND_INF_U,
            check_sandwich_and_inf_u(&flat, &state, t)?,
            sandwich_from_parts(1, 0.5, &[0.2, -0.1], &[1.0, 1.0], &[0.0, 0.0]),
        ),
        (
            NEWTON_MACLAURIN,
            check_newton_maclaurin(&flat, &state, &tol)?,
            newton_maclaurin_from_parts(2, &[2.0, 1.9], &[0.0, 0.0], &tol),
        ),
        (
            INTEGRAL_RATIO,
            check_integral_ratio(&flat, &state, &k_eq, 0.0, &tol)?,
            check_integral_ratio(&flat, &state, &k_bad, 0.0, &tol)?,
        ),
        (
            CHENG_YAU,
            check_cheng_yau(&neg_one, &zero, &flat.omega, &tol)?,
            cheng_yau_from_parts(1.0, 0.5, 1.0, 0.0, 1e-8, true, &tol),
        ),
        (
            LOG_COMPACTNESS,
            log_compactness_from_parts(2.0, 1.0, 2.0, 1.0, true, &tol),
            log_compactness_from_parts(5.0, 1.0, 2.0, 1.0, true, &tol),
        ),
        (
            HOLDER_LOWER_BOUND,
            check_holder_lower_bound(&flat, &state, 0.3, a, &tol)?,
            holder_from_parts(0.3, 1.0, 0.5, 0.5, 10.0, 1.0, &tol),
        ),
        (
            HORMANDER,
            check_hormander(&one_family, &flat.omega, &flat.omega, &[0.5, 1.0])?,
            hormander_from_parts(&[0.1, 0.2], &[11.0, 20.0], 1.0, true),
        ),
        (
            LIMINF_MAX_U,
            liminf_from_parts(
                1,
                &[LiminfEntry::new(&flat, t, &state.u, &k_eq)],
                true,
                &tol,
            ),
            liminf_from_parts(
                1,
                &[LiminfEntry::new(&flat, t, &state.u, &k_eq.scale(2.0))],
                true,
                &tol,
            ),
        ),
    ];
    let mut bad = Vec::new();
    for (name, pass, fail) in &cases {
        if !(pass.status == CheckStatus::Pass && fail.status == CheckStatus::Fail) {
            bad.push(format!("{name} ({:?}/{:?})", pass.status, fail.status));
        }
    }
    let covered = ALL_CHECKS
        .iter()
        .all(|c| cases.iter().any(|(n, _, _)| n == c));
    Ok((
        bad.is_empty() && covered,
        if bad.is_empty() {
            format!("{} checkers x 2 cases", cases.len())
        } else {
            format!("mismatched: {}", bad.join(", "))
        },
    ))
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let cfg_path = dir.path().join("scenario.toml");
    std::fs::write(&cfg_path, scenario_text(1, 32, PERTURBED_N1, 0.05))?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let status = Proc::new(env!("CARGO_BIN_EXE_cma"))
            .args(["path", "--threads", "1", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .output()?
            .status;
        if !status.success() {
            return Ok((false, format!("run {k} exited with {status}")));
        }
        outputs.push((
            std::fs::read(out.join("path.csv"))?,
            std::fs::read(out.join("estimates.csv"))?,
        ));
    }
    let same = outputs[0] == outputs[1];
    Ok((
        same,
        format!("path.csv and estimates.csv identical: {same}"),
    ))
}

fn main() {
    let total = Instant::now();
    let (flat_n1, _) = path_run(&scenario_text(1, 32, "", 0.05));
    let (flat_n2, _) = path_run(&scenario_text(2, 16, "", 0.1));
    let (pert_n1, pert_n1_secs) = path_run(&scenario_text(1, 64, PERTURBED_N1, 0.05));
    let (pert_n2, _) = path_run(&scenario_text(2, 16, PERTURBED_N2, 0.1));
    let runs = Runs {
        flat_n1,
        flat_n2,
        pert_n1,
        pert_n2,
        pert_n1_secs,
    };

    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 flat closed form", c1_flat_closed_form()),
        ("2 dense oracle equivalence", c2_dense_oracle()),
        ("3 volume identity", c3_volume_identity(&runs)),
        ("4 quadratic Newton tail", c4_quadratic_tail(&runs)),
        ("5 Schwarz equality and gating", c5_schwarz(&runs)),
        ("6 maximum principle bound", c6_max_u(&runs)),
        ("7 pointwise Newton-Maclaurin", c7_newton_maclaurin(&runs)),
        ("8 Cheng-Yau randomized suite", c8_cheng_yau()),
        ("9 logarithmic W^{1,2} bounds", c9_log_compactness()),
        ("10 Hölder chain", c10_holder(&runs)),
        ("11 detector soundness", c11_detectors()),
        ("12 determinism", c12_determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in criteria {
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!("{} [{name}] {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!(
        "acceptance: {} of 12 passed in {:.1} s",
        12 - failed,
        total.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
