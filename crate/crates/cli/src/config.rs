//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! seed = 7                      # optional, default 0
//!
//! [grid]
//! n = 1                         # complex dimension, 1 or 2
//! points = 32                   # per real axis, power of two
//!
//! [metric]
//! kind = "perturbed"            # "flat" | "perturbed" | "file"
//! modes = [ { amplitude = 0.004, frequency = [1, 0], phase = 0.0 } ]
//! # path = "omega.bin"          # kind = "file", relative to the scenario
//!
//! [schedule]
//! t1 = "auto"                   # or a number
//! t_min = 0.05                  # required
//! ratio = 0.6
//! margin = 1.1                  # t1 = margin * critical t when auto
//! min_step_ratio = 1e-3
//! geometric = true
//! solve_t = 0.5                 # optional, used by `solve` (default t1)
//!
//! [solver]                      # every key optional
//! tol = 1e-10
//! max_newton = 40
//!
//! [estimates]                   # every key optional
//! checks = []                   # empty = all
//! tolerance = { rel = 1e-8, abs = 1e-10 }
//! beta_grid = [0.1, 0.5, 1.0]
//! direction_samples = 64
//! compare_cold_start = false
//! synthetic = { pairs = 20, modes = 3, max_freq = 2, amplitude = 0.5 }
//!
//! [output]
//! dir = "out"
//! fields = false                # dump fields/*.bin
//! ```

use std::path::{Path, PathBuf};

use cma_core::calculus::min_eigenvalue_with_index;
use cma_core::estimates::{SuiteConfig, Tolerance};
use cma_core::io::read_hermitian_bin;
use cma_core::testbed::{perturbed_metric, CosineMode};
use cma_core::{HermitianField, SolverConfig, TorusGrid};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("declared metric is not positive: min eigenvalue {min_eig:e} at grid point {point}")]
    InvalidMetric { min_eig: f64, point: usize },

    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    #[serde(default)]
    pub metric: MetricSpec,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub estimates: EstimatesSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory the scenario was loaded from; file metrics resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricSpec {
    #[default]
    Flat,
    Perturbed {
        modes: Vec<CosineMode>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum T1 {
    #[default]
    Auto,
    Value(f64),
}

impl Serialize for T1 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            T1::Auto => s.serialize_str("auto"),
            T1::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for T1 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(T1::Value(v)),
            Raw::Int(v) => Ok(T1::Value(v as f64)),
            Raw::Word(w) if w == "auto" => Ok(T1::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "t1 must be \"auto\" or a number, got \"{w}\""
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    #[serde(default)]
    pub t1: T1,
    pub t_min: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_min_step")]
    pub min_step_ratio: f64,
    #[serde(default = "default_true")]
    pub geometric: bool,
    #[serde(default)]
    pub solve_t: Option<f64>,
}

fn default_ratio() -> f64 {
    0.6
}
fn default_margin() -> f64 {
    1.1
}
fn default_min_step() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatesSection {
    pub checks: Vec<String>,
    pub tolerance: Tolerance,
    pub beta_grid: Vec<f64>,
    pub direction_samples: usize,
    pub compare_cold_start: bool,
    pub synthetic: SyntheticSection,
}

impl Default for EstimatesSection {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            checks: s.checks,
            tolerance: s.tolerance,
            beta_grid: s.beta_grid,
            direction_samples: 64,
            compare_cold_start: false,
            synthetic: SyntheticSection::default(),
        }
    }
}

impl EstimatesSection {
    pub fn suite(&self) -> SuiteConfig {
        SuiteConfig {
            checks: self.checks.clone(),
            tolerance: self.tolerance,
            beta_grid: self.beta_grid.clone(),
        }
    }
}

/// Random `(v, φ)` pairs for the estimate-only run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSection {
    pub pairs: usize,
    pub modes: usize,
    pub max_freq: i32,
    /// Bound on the complex Hessian of `v`.
    pub amplitude: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        Self {
            pairs: 20,
            modes: 3,
            max_freq: 2,
            amplitude: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub fields: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            fields: false,
        }
    }
}

impl ScenarioConfig {
    pub fn grid(&self) -> Result<TorusGrid, ConfigError> {
        TorusGrid::new(self.grid.n, self.grid.points)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Builds `ω` without checking positivity.
    pub fn raw_metric(&self) -> Result<HermitianField, ConfigError> {
        let grid = self.grid()?;
        let invalid = |e: cma_core::Error| ConfigError::Invalid(e.to_string());
        match &self.metric {
            MetricSpec::Flat => Ok(HermitianField::identity(&grid)),
            MetricSpec::Perturbed { modes } => perturbed_metric(&grid, modes).map_err(invalid),
            MetricSpec::File { path } => {
                let full = self.base_dir.join(path);
                let bytes = std::fs::read(&full).map_err(|e| ConfigError::Io {
                    path: full.clone(),
                    message: e.to_string(),
                })?;
                let h = read_hermitian_bin(&mut bytes.as_slice()).map_err(invalid)?;
                if !h.grid().same_as(&grid) {
                    return Err(ConfigError::Invalid(format!(
                        "{} holds n = {}, N = {}, scenario declares n = {}, N = {}",
                        full.display(),
                        h.grid().n(),
                        h.grid().points(),
                        grid.n(),
                        grid.points()
                    )));
                }
                if h.hermitian_defect() > 1e-12 {
                    return Err(ConfigError::Invalid(format!(
                        "{} is not Hermitian (defect {:e})",
                        full.display(),
                        h.hermitian_defect()
                    )));
                }
                Ok(h)
            }
        }
    }

    /// `ω`, checked to be positive definite everywhere.
    pub fn metric(&self) -> Result<HermitianField, ConfigError> {
        let h = self.raw_metric()?;
        let (min_eig, point) = min_eigenvalue_with_index(&h);
        if !(min_eig > 0.0) {
            return Err(ConfigError::InvalidMetric { min_eig, point });
        }
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: cma_core::Error| ConfigError::Invalid(e.to_string());
        self.metric()?;
        self.solver.validate().map_err(invalid)?;
        self.estimates.suite().validate().map_err(invalid)?;
        let s = &self.schedule;
        if !(s.t_min > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "schedule.t_min must be > 0, got {}",
                s.t_min
            )));
        }
        if let T1::Value(t1) = s.t1 {
            if !(t1 > s.t_min) {
                return Err(ConfigError::Invalid(format!(
                    "schedule.t1 = {t1} must exceed t_min = {}",
                    s.t_min
                )));
            }
        }
        if !(s.margin > 1.0) {
            return Err(ConfigError::Invalid(format!(
                "schedule.margin must be > 1, got {}",
                s.margin
            )));
        }
        for (name, r) in [("ratio", s.ratio), ("min_step_ratio", s.min_step_ratio)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "schedule.{name} must lie in (0, 1), got {r}"
                )));
            }
        }
        if matches!(s.solve_t, Some(t) if !(t > 0.0)) {
            return Err(ConfigError::Invalid("schedule.solve_t must be > 0".into()));
        }
        let n = self.grid.n;
        if self.estimates.direction_samples < if n == 2 { 32 } else { 1 } {
            return Err(ConfigError::Invalid(format!(
                "estimates.direction_samples must be at least {} for n = {n}",
                if n == 2 { 32 } else { 1 }
            )));
        }
        let syn = &self.estimates.synthetic;
        if syn.modes == 0 || syn.max_freq < 1 || !(syn.amplitude > 0.0) {
            return Err(ConfigError::Invalid(
                "estimates.synthetic needs modes >= 1, max_freq >= 1, amplitude > 0".into(),
            ));
        }
        Ok(())
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses and validates a scenario; `base_dir` anchors relative file paths.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ConfigError> {
    let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new(".")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = "[grid]\nn = 1\npoints = 32\n[schedule]\nt_min = 0.1\n";

    #[test]
    fn flat_defaults() {
        let cfg = parse_config(FLAT, Path::new(".")).unwrap();
        assert_eq!(cfg.metric, MetricSpec::Flat);
        assert_eq!(cfg.schedule.t1, T1::Auto);
        assert_eq!(min_eigenvalue_with_index(&cfg.metric().unwrap()).0, 1.0);
        assert_eq!(cfg.estimates.synthetic.pairs, 20);
    }

    #[test]
    fn strong_mode_is_rejected_with_its_eigenvalue() {
        let text = format!(
            "{FLAT}[metric]\nkind = \"perturbed\"\nmodes = [{{ amplitude = 0.2, frequency = [1, 0] }}]\n"
        );
        match parse_config(&text, Path::new(".")) {
            Err(ConfigError::InvalidMetric { min_eig, .. }) => {
                let expected = 1.0 - 0.2 * std::f64::consts::PI.powi(2);
                assert!((min_eig - expected).abs() < 1e-12, "{min_eig}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_t_min_names_the_field() {
        let text = "[grid]\nn = 1\npoints = 32\n\n[schedule]\nratio = 0.5\n";
        match parse_config(text, Path::new(".")) {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert!(message.contains("t_min"), "{message}");
                assert!(line >= 5, "{line}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let text = "[grid]\nn = 1\npoints = = 32\n";
        match parse_config(text, Path::new(".")) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn t1_accepts_numbers_and_auto_only() {
        let ok = FLAT.replace("t_min", "t1 = 2\nt_min");
        assert_eq!(
            parse_config(&ok, Path::new(".")).unwrap().schedule.t1,
            T1::Value(2.0)
        );
        let bad = FLAT.replace("t_min", "t1 = \"soon\"\nt_min");
        assert!(matches!(
            parse_config(&bad, Path::new(".")),
            Err(ConfigError::Parse { .. })
        ));
        let low = FLAT.replace("t_min", "t1 = 0.05\nt_min");
        assert!(matches!(
            parse_config(&low, Path::new(".")),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{FLAT}[solver]\ntolerance = 1e-3\n");
        assert!(matches!(
            parse_config(&text, Path::new(".")),
            Err(ConfigError::Parse { .. })
        ));
    }
}
