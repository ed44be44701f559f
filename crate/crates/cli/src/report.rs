//! `report.json` and the `summary.md` table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use imcf_core::{CheckReport, CheckStatus};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Completed,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub t: f64,
    pub cause: String,
}

/// Headline numbers of a run, used by sweeps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub t_final: f64,
    pub mean_radius_final: Option<f64>,
    pub lambda1_initial: Option<f64>,
    pub lambda1_final: Option<f64>,
    /// Pinching constant used by the checks, if positive.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort: Option<Abort>,
    pub summary: RunSummary,
    pub checks: Vec<CheckReport>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail).count()
    }

    /// Completed with no failing check.
    pub fn ok(&self) -> bool {
        self.status == RunStatus::Completed && self.failures() == 0
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("report.json"), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("report.json");
        let text = fs::read_to_string(&path).with_context(|| format!("no report at {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

pub fn render_summary(report: &RunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Run summary: {}\n", report.shape);
    match (&report.status, &report.abort) {
        (RunStatus::Aborted, Some(a)) => {
            let _ = writeln!(out, "Run **aborted** at t = {}: {}\n", a.t, a.cause);
        }
        _ => {
            let _ = writeln!(
                out,
                "Run completed at t = {}. {} of {} checks failed.\n",
                report.summary.t_final,
                report.failures(),
                report.checks.len()
            );
        }
    }
    if let Some(a) = report.summary.alpha {
        let _ = writeln!(out, "α = {a}\n");
    }
    if report.checks.is_empty() {
        return out;
    }
    out.push_str("| check | status | margin | tolerance | claim | note |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for c in &report.checks {
        let margin = if c.margin.is_nan() {
            "n/a".to_string()
        } else {
            format!("{:.3e}", c.margin)
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.1e} | {} | {} |",
            c.name,
            c.status,
            margin,
            c.tolerance,
            cell(&c.claim),
            cell(c.note.as_deref().unwrap_or(""))
        );
    }
    out
}

/// Rewrites `summary.md` from `report.json`.
pub fn emit_report(dir: &Path) -> Result<RunReport> {
    let report = RunReport::read(dir)?;
    fs::write(dir.join("summary.md"), render_summary(&report))?;
    Ok(report)
}
