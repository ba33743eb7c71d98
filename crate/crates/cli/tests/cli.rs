use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn cma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cma"))
        .args(args)
        .output()
        .unwrap()
}

fn run_to(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, Value) {
    let mut args = vec![
        sub,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = cma(&args);
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    (o.status.code().unwrap(), report)
}

fn csv_column(text: &str, col: &str) -> Vec<String> {
    let mut lines = text.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|c| c == col)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn flat_path_exits_zero_with_exact_volumes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to("path", &scenario("flat_n1.toml"), dir.path(), &[]);
    assert_eq!(code, 0, "{report:#}");
    let csv = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
    let ts = csv_column(&csv, "t");
    let vols = csv_column(&csv, "volume");
    assert!(ts.len() >= 5);
    for (t, v) in ts.iter().zip(&vols) {
        let (t, v): (f64, f64) = (t.parse().unwrap(), v.parse().unwrap());
        assert!((v - t).abs() <= 1e-8 * t, "{t} {v}");
    }
    assert!(report["failures"].as_array().unwrap().is_empty());
    assert_eq!(report["exit_code"], 0);
    assert!(report["timings"]["total_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(report["config"]["grid"]["points"], 32);
}

#[test]
fn zero_solver_tolerance_fails_with_a_listed_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        std::fs::read_to_string(scenario("perturbed_n1.toml")).unwrap() + "\n[solver]\ntol = 0.0\n";
    let cfg = dir.path().join("zero.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("out");
    let (code, report) = run_to("path", &cfg, &out, &[]);
    assert_ne!(code, 0);
    let failures = report["failures"].as_array().unwrap();
    assert!(!failures.is_empty());
    assert_eq!(failures[0]["kind"], "path");
    assert!(
        failures[0]["message"]
            .as_str()
            .unwrap()
            .contains("initial solve"),
        "{failures:?}"
    );
}

#[test]
fn estimate_only_run_writes_twenty_cheng_yau_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run_to("estimates", &scenario("cheng_yau.toml"), dir.path(), &[]);
    assert_eq!(code, 0, "{report:#}");
    let csv = std::fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    let checks = csv_column(&csv, "check");
    assert_eq!(checks.len(), 20);
    assert!(checks.iter().all(|c| c == "cheng_yau"));
    assert!(csv_column(&csv, "status").iter().all(|s| s == "pass"));
    let seeds: Vec<f64> = report["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["values"]["seed"].as_f64().unwrap())
        .collect();
    assert_eq!(seeds, (100..120).map(|s| s as f64).collect::<Vec<_>>());
}

#[test]
fn seed_flag_overrides_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = run_to(
        "estimates",
        &scenario("cheng_yau.toml"),
        &dir.path().join("a"),
        &["--seed", "5"],
    );
    assert_eq!(a["config"]["seed"], 5);
    assert_eq!(a["records"][0]["values"]["seed"], 5.0);
}

#[test]
fn bad_configs_exit_two_and_still_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strong.toml");
    std::fs::write(
        &cfg,
        "[grid]\nn = 1\npoints = 32\n[metric]\nkind = \"perturbed\"\nmodes = [{ amplitude = 0.2, frequency = [1, 0] }]\n[schedule]\nt_min = 0.1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, report) = run_to("path", &cfg, &out, &[]);
    assert_eq!(code, 2);
    let msg = report["failures"][0]["message"].as_str().unwrap();
    assert!(msg.contains("min eigenvalue"), "{msg}");
    assert_eq!(report["failures"][0]["kind"], "config");
}

#[test]
fn threads_one_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let (code, _) = run_to(
            "path",
            &scenario("perturbed_n1.toml"),
            d,
            &["--threads", "1"],
        );
        assert_eq!(code, 0);
    }
    assert_eq!(read(&a, "path.csv"), read(&b, "path.csv"));
    assert_eq!(read(&a, "estimates.csv"), read(&b, "estimates.csv"));
}

#[test]
fn strict_turns_skips_into_failures_only_when_hypotheses_hold() {
    let dir = tempfile::tempdir().unwrap();
    // flat: H = 0, so the negative-curvature bound skips
    let (code, report) = run_to(
        "path",
        &scenario("flat_n1.toml"),
        &dir.path().join("flat"),
        &["--strict"],
    );
    assert_eq!(code, 1);
    let names: Vec<&str> = report["failures"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|f| f["name"].as_str())
        .collect();
    assert!(names.contains(&"S_upper_negative"), "{names:?}");
    // mixed curvature: the hypotheses are not expected to hold
    let (code, _) = run_to(
        "path",
        &scenario("perturbed_n1.toml"),
        &dir.path().join("pert"),
        &["--strict"],
    );
    assert_eq!(code, 0);
}

#[test]
fn solve_and_curvature_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(scenario("flat_n1.toml"))
        .unwrap()
        .replace("t1 = 1.0", "t1 = 1.0\nsolve_t = 0.25")
        .replace("dir = \"../out/flat_n1\"", "fields = true");
    let cfg = dir.path().join("solve.toml");
    std::fs::write(&cfg, text).unwrap();
    let out = dir.path().join("solve");
    let (code, report) = run_to("solve", &cfg, &out, &[]);
    assert_eq!(code, 0, "{report:#}");
    let csv = std::fs::read_to_string(out.join("path.csv")).unwrap();
    let max_u: f64 = csv_column(&csv, "max_u")[0].parse().unwrap();
    assert!((max_u - 0.25f64.ln()).abs() < 1e-10);
    let bytes = std::fs::read(out.join("fields/u.bin")).unwrap();
    let u = cma_core::io::read_scalar_bin(&mut bytes.as_slice()).unwrap();
    assert_eq!(u.len(), 32 * 32);

    let out = dir.path().join("curv");
    let (code, report) = run_to("curvature", &scenario("perturbed_n1.toml"), &out, &[]);
    assert_eq!(code, 0);
    assert_eq!(report["curvature"]["classification"], "mixed");
    let csv = std::fs::read_to_string(out.join("curvature.csv")).unwrap();
    assert_eq!(csv.lines().count(), 64 * 64 + 1);
}

#[test]
fn selftest_and_usage_errors() {
    let o = cma(&["selftest"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS ")).count(), 4);
    assert_eq!(cma(&["path"]).status.code(), Some(2));
    assert_eq!(cma(&["nonsense"]).status.code(), Some(2));
}
