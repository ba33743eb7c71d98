use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cma_cli::config::load_config;
use cma_cli::scenario::{config_failure, output_dir, run, Command, RunOptions};
use cma_cli::selftest::run_selftest;

#[derive(Parser)]
#[command(
    name = "cma",
    version,
    about = "Continuity-method runs for complex Monge-Ampere equations on tori"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads. `--threads 1` gives bit-reproducible output.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Count skipped checks as failures when the curvature hypotheses hold.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Solve at a single t (`schedule.solve_t`, default t1).
    Solve,
    /// Follow the path from t1 to t_min and run the estimate suite.
    Path,
    /// Estimate-only run on random (v, φ) pairs.
    Estimates,
    /// Holomorphic sectional curvature of the background metric.
    Curvature,
    /// Quick built-in checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: cannot set up {k} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let threads = rayon::current_num_threads();

    let command = match cli.command {
        Cmd::Selftest => {
            let lines = run_selftest();
            for l in &lines {
                println!(
                    "{} {}: {}",
                    if l.passed { "PASS" } else { "FAIL" },
                    l.name,
                    l.detail
                );
            }
            return if lines.iter().all(|l| l.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
        Cmd::Solve => Command::Solve,
        Cmd::Path => Command::Path,
        Cmd::Estimates => Command::Estimates,
        Cmd::Curvature => Command::Curvature,
    };
    let opts = RunOptions {
        strict: cli.strict,
        threads,
    };

    let Some(config_path) = cli.config.as_deref() else {
        eprintln!("error: --config is required for `{}`", command.as_str());
        return ExitCode::from(2);
    };
    let (dir, artifacts_exit) = match load_config(config_path) {
        Ok(mut cfg) => {
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let dir = output_dir(cli.out.as_deref(), Some(&cfg));
            let art = run(command, &cfg, &opts);
            let code = art.exit_code();
            if let Err(e) = art.write(&dir) {
                eprintln!("error: writing {}: {e}", dir.display());
                return ExitCode::from(2);
            }
            for f in &art.report.failures {
                eprintln!(
                    "failure [{}] {}{}: {}",
                    f.kind,
                    f.name.as_deref().unwrap_or("-"),
                    f.t.map(|t| format!(" at t = {t}")).unwrap_or_default(),
                    f.message
                );
            }
            (dir, code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let dir = output_dir(cli.out.as_deref(), None);
            let report = config_failure(command.as_str(), e.to_string(), &opts);
            let written = std::fs::create_dir_all(&dir)
                .and_then(|_| std::fs::write(dir.join("report.json"), report.to_json()));
            if let Err(w) = written {
                eprintln!("error: writing {}: {w}", dir.display());
            }
            (dir, report.exit_code)
        }
    };
    println!("artifacts in {}", dir.display());
    ExitCode::from(artifacts_exit as u8)
}
