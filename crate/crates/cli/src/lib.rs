//! Scenario runner: TOML scenarios in, CSV and JSON artifacts out.

// `!(x > 0.0)` is deliberate throughout: NaN must fail the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod scenario;
pub mod selftest;
pub mod synthetic;
