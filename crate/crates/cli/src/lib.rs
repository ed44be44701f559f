//! Scenario files, batch runs and reports around `imcf-core`.
//!
//! A run directory holds `config.toml` (the resolved scenario), `series.csv`,
//! one `series_p<p>.csv` per exponent, `snapshots/` (OFF meshes),
//! `eigenfunctions/`, `report.json` and `summary.md`.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod scenario;
pub mod series;
pub mod sweep;

pub use config::{parse_config, ScenarioConfig, CHECKS};
pub use report::{emit_report, RunReport, RunStatus};
pub use scenario::{run_scenario, verify_run};
pub use sweep::{sweep, SweepParam};
