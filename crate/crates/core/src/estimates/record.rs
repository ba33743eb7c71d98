use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::io::fmt_f64;

pub const SCHWARZ: &str = "schwarz";
pub const S_UPPER_NEGATIVE: &str = "S_upper_negative";
pub const S_UPPER_NONPOSITIVE: &str = "S_upper_nonpositive";
pub const MAX_U: &str = "max_u";
pub const SANDWICH_AND_INF_U: &str = "sandwich_and_inf_u";
pub const NEWTON_MACLAURIN: &str = "newton_maclaurin";
pub const INTEGRAL_RATIO: &str = "integral_ratio";
pub const HORMANDER: &str = "hormander";
pub const CHENG_YAU: &str = "cheng_yau";
pub const LOG_COMPACTNESS: &str = "log_compactness";
pub const HOLDER_LOWER_BOUND: &str = "holder_lower_bound";
pub const LIMINF_MAX_U: &str = "liminf_max_u";

pub const ALL_CHECKS: [&str; 12] = [
    SCHWARZ,
    S_UPPER_NEGATIVE,
    S_UPPER_NONPOSITIVE,
    MAX_U,
    SANDWICH_AND_INF_U,
    NEWTON_MACLAURIN,
    INTEGRAL_RATIO,
    HORMANDER,
    CHENG_YAU,
    LOG_COMPACTNESS,
    HOLDER_LOWER_BOUND,
    LIMINF_MAX_U,
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skip => "skip",
        }
    }
}

/// Tolerance `max(abs, rel * scale)` where `scale` is the magnitude of the
/// fields entering a check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            rel: 1e-8,
            abs: 1e-10,
        }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs }
    }

    /// Zero tolerance; every negative margin fails.
    pub fn exact() -> Self {
        Self { rel: 0.0, abs: 0.0 }
    }

    pub fn effective(&self, scale: f64) -> f64 {
        self.abs.max(self.rel * scale.abs())
    }
}

/// Outcome of one check. `worst_margin` is the most violating value of
/// `LHS - RHS` written so that the estimate reads `margin >= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// `None` for checks over a whole family or path.
    pub t: Option<f64>,
    pub hypothesis_held: bool,
    pub worst_margin: f64,
    pub location: Option<usize>,
    pub tolerance: f64,
    pub status: CheckStatus,
    /// Measured constants and intermediate integrals.
    pub values: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl CheckRecord {
    /// Skip when the hypothesis fails, otherwise pass iff `margin >= -tol`.
    pub fn new(
        name: &str,
        hypothesis_held: bool,
        worst_margin: f64,
        location: Option<usize>,
        tolerance: f64,
    ) -> Self {
        let status = if !hypothesis_held {
            CheckStatus::Skip
        } else if worst_margin >= -tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name: name.to_string(),
            t: None,
            hypothesis_held,
            worst_margin,
            location,
            tolerance,
            status,
            values: BTreeMap::new(),
            note: None,
        }
    }

    /// A check whose denominator vanished; no margin is defined.
    pub fn degenerate(name: &str, hypothesis_held: bool, note: &str) -> Self {
        let mut r = Self::new(name, hypothesis_held, f64::NAN, None, 0.0);
        r.status = CheckStatus::Skip;
        r.note = Some(note.to_string());
        r
    }

    pub fn at_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.values.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Downgrades a pass to a fail; skips are left alone.
    pub fn require(mut self, ok: bool, why: &str) -> Self {
        if !ok && self.status == CheckStatus::Pass {
            self.status = CheckStatus::Fail;
            self.note = Some(why.to_string());
        }
        self
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub records: Vec<CheckRecord>,
}

impl EstimateReport {
    pub fn new(mut records: Vec<CheckRecord>) -> Self {
        sort_records(&mut records);
        Self { records }
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.records.push(record);
        sort_records(&mut self.records);
    }

    pub fn extend(&mut self, records: impl IntoIterator<Item = CheckRecord>) {
        self.records.extend(records);
        sort_records(&mut self.records);
    }

    pub fn count(&self, status: CheckStatus) -> usize {
        self.records.iter().filter(|r| r.status == status).count()
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records
            .iter()
            .filter(|r| r.status == CheckStatus::Fail)
    }

    pub fn find(&self, name: &str, t: Option<f64>) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.name == name && r.t == t)
    }

    /// One row per record: `t,check,hypothesis_held,worst_margin,status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,check,hypothesis_held,worst_margin,status\n");
        for r in &self.records {
            let t = r.t.map(fmt_f64).unwrap_or_default();
            let m = if r.worst_margin.is_nan() {
                String::new()
            } else {
                fmt_f64(r.worst_margin)
            };
            let _ = writeln!(
                out,
                "{t},{},{},{m},{}",
                r.name,
                r.hypothesis_held,
                r.status.as_str()
            );
        }
        out
    }
}

/// Family-level records (no `t`) first, then increasing `t`, then name.
fn sort_records(records: &mut [CheckRecord]) {
    records.sort_by(|a, b| {
        let ta = a.t.unwrap_or(f64::NEG_INFINITY);
        let tb = b.t.unwrap_or(f64::NEG_INFINITY);
        ta.total_cmp(&tb).then_with(|| a.name.cmp(&b.name))
    });
}
