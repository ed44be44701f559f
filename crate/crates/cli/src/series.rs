//! `series.csv`, the per-exponent series files and snapshot naming.
//!
//! `series.csv` columns, in order:
//! `t, area, H_min, H_max, pinch_margin, eps_t, lambda1, lambda1_p,
//! lambda1_rescaled, decay_bound, rescaled_monotone_q, sphericity`.
//! The `lambda1_p` group refers to the first exponent of the scenario's `p`
//! list; `series_p<p>.csv` repeats that group for every exponent.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use imcf_core::flow::eigen_rescale;
use imcf_core::FlowTrace;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub area: f64,
    #[serde(rename = "H_min")]
    pub h_min: f64,
    #[serde(rename = "H_max")]
    pub h_max: f64,
    pub pinch_margin: Option<f64>,
    pub eps_t: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda1_p: Option<f64>,
    pub lambda1_rescaled: Option<f64>,
    pub decay_bound: Option<f64>,
    pub rescaled_monotone_q: Option<f64>,
    pub sphericity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentRow {
    pub t: f64,
    pub lambda1_p: f64,
    pub lambda1_rescaled: f64,
    pub decay_bound: f64,
    pub rescaled_monotone_q: f64,
}

/// `λ₁,ₚ`, `λ̃`, `λ₁,ₚ(0) e^{−pε₀t}` and `e^{−p(1/n−ε₀)t} λ̃` along the trace.
pub fn exponent_rows(trace: &FlowTrace, n: usize, p: f64, eps0: f64) -> Vec<ExponentRow> {
    let series = trace.lambda_series(p);
    let Some(&(t0, l0)) = series.first() else {
        return Vec::new();
    };
    let inv_n = 1.0 / n as f64;
    series
        .into_iter()
        .map(|(t, l)| {
            let tilde = eigen_rescale(l, t, n, p);
            ExponentRow {
                t,
                lambda1_p: l,
                lambda1_rescaled: tilde,
                decay_bound: l0 * (-p * eps0 * (t - t0)).exp(),
                rescaled_monotone_q: (-p * (inv_n - eps0) * t).exp() * tilde,
            }
        })
        .collect()
}

pub fn series_rows(trace: &FlowTrace, primary: &[ExponentRow]) -> Vec<SeriesRow> {
    trace
        .samples
        .iter()
        .map(|s| {
            let e = primary.iter().find(|r| r.t == s.t);
            SeriesRow {
                t: s.t,
                area: s.area,
                h_min: s.h_min,
                h_max: s.h_max,
                pinch_margin: s.pinch_margin,
                eps_t: s.eps_t,
                lambda1: s.lambda1,
                lambda1_p: e.map(|r| r.lambda1_p),
                lambda1_rescaled: e.map(|r| r.lambda1_rescaled),
                decay_bound: e.map(|r| r.decay_bound),
                rescaled_monotone_q: e.map(|r| r.rescaled_monotone_q),
                sphericity: s.sphericity,
            }
        })
        .collect()
}

pub fn exponent_file(dir: &Path, p: f64) -> PathBuf {
    dir.join(format!("series_p{p}.csv"))
}

pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t:.6}.off")
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut r = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec.with_context(|| format!("parsing {}", path.display()))?);
    }
    Ok(rows)
}
