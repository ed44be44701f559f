//! One scenario: flow, artifacts, check battery.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use imcf_core::geometry::io::{read_off, surface_from_positions, write_off};
use imcf_core::verify::{
    alpha_max, check_area_growth, check_decay_bound, check_h_decay, check_isoperimetric_bound, check_monotone,
    check_pinching_preserved, check_rescaled_monotone, check_rescaled_schedule_bound, check_rounding, epsilon_props,
    evolution_residual_richardson, PinchingObserver, SpectralObserver,
};
use imcf_core::{
    build_atlas, compute_tensors, embed, run_partial, CheckReport, CheckStatus, Error, FlowConfig, FlowTrace, Observer,
    PinchSchedule, RadialProfile, StarSurface, TraceSample,
};
use rayon::prelude::*;

use crate::config::{ScenarioConfig, Speed};
use crate::report::{render_summary, Abort, RunReport, RunStatus, RunSummary};
use crate::series::{
    exponent_file, exponent_rows, read_rows, series_rows, snapshot_name, write_rows, ExponentRow, SeriesRow,
};

pub fn initial_surface(cfg: &ScenarioConfig) -> Result<StarSurface> {
    let atlas = Arc::new(build_atlas(cfg.backend.atlas_kind(), cfg.resolution())?);
    Ok(embed(atlas, &cfg.shape)?)
}

/// Explicit α, or the largest admissible one on `surface`. `Ok(None)` when
/// the surface admits no positive α.
fn resolve_alpha(cfg: &ScenarioConfig, surface: &StarSurface) -> imcf_core::Result<Option<f64>> {
    if let Some(a) = cfg.alpha.explicit() {
        return Ok(Some(a));
    }
    let a = alpha_max(&compute_tensors(surface)?)?;
    Ok((a > 0.0).then_some(a))
}

fn failure_time(e: &Error, trace: &FlowTrace, t0: f64) -> f64 {
    match e {
        Error::CurvatureCollapse { t, .. } | Error::StarShapeLoss { t, .. } | Error::NumericalBlowup { t, .. } => *t,
        _ => trace.last().map_or(t0, |s| s.t),
    }
}

fn summarize(trace: &FlowTrace, alpha: Option<f64>) -> RunSummary {
    RunSummary {
        t_final: trace.last().map_or(0.0, |s| s.t),
        mean_radius_final: trace.last().map(|s| s.mean_radius),
        lambda1_initial: trace.samples.first().and_then(|s| s.lambda1),
        lambda1_final: trace.last().and_then(|s| s.lambda1),
        alpha,
    }
}

fn prepare_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for sub in ["snapshots", "eigenfunctions"] {
        let d = out.join(sub);
        if d.exists() {
            fs::remove_dir_all(&d)?;
        }
        fs::create_dir(&d)?;
    }
    for stale in ["report.json", "summary.md", "series.csv"] {
        let f = out.join(stale);
        if f.exists() {
            fs::remove_file(f)?;
        }
    }
    for entry in fs::read_dir(out)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if name.starts_with("series_p") && name.ends_with(".csv") {
            fs::remove_file(&path)?;
        }
    }
    Ok(())
}

fn write_series(cfg: &ScenarioConfig, dir: &Path, trace: &FlowTrace, alpha: Option<f64>) -> Result<()> {
    let eps0 = alpha.unwrap_or(0.0) / 2.0;
    let mut primary = Vec::new();
    for (k, &p) in cfg.p.iter().enumerate() {
        let rows = exponent_rows(trace, cfg.dim(), p, eps0);
        write_rows(&exponent_file(dir, p), &rows)?;
        if k == 0 {
            primary = rows;
        }
    }
    write_rows(&dir.join("series.csv"), &series_rows(trace, &primary))
}

fn write_snapshots(dir: &Path, trace: &FlowTrace) -> Result<()> {
    for s in &trace.samples {
        let f = File::create(dir.join("snapshots").join(snapshot_name(s.t)))?;
        write_off(&s.snapshot, std::io::BufWriter::new(f))?;
    }
    Ok(())
}

/// Eigenfunctions at the first and last sample as `vertex,u` CSV, plus the
/// solver diagnostics of every sample in `results.json`.
fn write_eigenfunctions(dir: &Path, spectral: &SpectralObserver) -> Result<()> {
    let dir = dir.join("eigenfunctions");
    let diag: Vec<_> = spectral
        .results
        .iter()
        .map(|(t, r)| serde_json::json!({ "t": t, "result": r }))
        .collect();
    fs::write(dir.join("results.json"), serde_json::to_string_pretty(&diag)? + "\n")?;
    let (Some(first), Some(last)) = (spectral.results.first(), spectral.results.last()) else {
        return Ok(());
    };
    for (t, r) in spectral.results.iter().filter(|(t, _)| *t == first.0 || *t == last.0) {
        let mut w = csv::Writer::from_path(dir.join(format!("u_p{}_t{t:.6}.csv", r.p)))?;
        w.write_record(["vertex", "u"])?;
        for (i, u) in r.eigenfunction.iter().enumerate() {
            w.write_record([i.to_string(), u.to_string()])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Runs the flow, writes every artifact into `out` and returns the report.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    prepare_dir(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    let s0 = initial_surface(cfg)?;
    let speed = cfg.speed.function();

    let aborted = |trace: &FlowTrace, alpha, e: &Error| -> Result<RunReport> {
        let report = RunReport {
            status: RunStatus::Aborted,
            shape: cfg.shape.to_string(),
            abort: Some(Abort {
                t: failure_time(e, trace, s0.t()),
                cause: e.to_string(),
            }),
            summary: summarize(trace, alpha),
            checks: Vec::new(),
        };
        report.write(out)?;
        fs::write(out.join("summary.md"), render_summary(&report))?;
        Ok(report)
    };

    // A surface with H ≤ 0 has no α; the flow itself reports the violation.
    let alpha = match resolve_alpha(cfg, &s0) {
        Ok(a) => a,
        Err(Error::HypothesisViolation(_)) => None,
        Err(e) => return aborted(&FlowTrace::default(), None, &e),
    };
    let schedule = alpha.map(|a| PinchSchedule::new(cfg.dim(), a)).transpose()?;

    let mut spectral = SpectralObserver::new(cfg.p.clone(), cfg.eigen_tol, cfg.plaplace_for(2.0));
    spectral.keep_results = true;
    let mut pinch = schedule.map(|schedule| PinchingObserver { schedule, t0: s0.t() });
    let mut observers: Vec<&mut dyn Observer> = vec![&mut spectral];
    if let Some(p) = pinch.as_mut() {
        observers.push(p);
    }
    let flow = FlowConfig::new(cfg.dt_policy(), cfg.t_end, cfg.sample_interval());
    let (trace, err) = run_partial(&s0, &speed, &flow, &mut observers);

    write_series(cfg, out, &trace, alpha)?;
    write_snapshots(out, &trace)?;
    write_eigenfunctions(out, &spectral)?;
    if let Some(e) = err {
        return aborted(&trace, alpha, &e);
    }

    let names = cfg.check_names();
    let ctx = CheckContext {
        cfg,
        trace: &trace,
        alpha,
        schedule,
    };
    let report = RunReport {
        status: RunStatus::Completed,
        shape: cfg.shape.to_string(),
        abort: None,
        summary: summarize(&trace, alpha),
        checks: run_checks(&ctx, &names),
    };
    report.write(out)?;
    fs::write(out.join("summary.md"), render_summary(&report))?;
    Ok(report)
}

/// Rebuilds the trace of a completed run from `series.csv`, the per-exponent
/// files and the snapshots.
pub fn load_trace(cfg: &ScenarioConfig, dir: &Path) -> Result<FlowTrace> {
    let rows: Vec<SeriesRow> = read_rows(&dir.join("series.csv"))?;
    let per_p: Vec<(f64, Vec<ExponentRow>)> = cfg
        .p
        .iter()
        .map(|&p| Ok((p, read_rows(&exponent_file(dir, p))?)))
        .collect::<Result<_>>()?;
    let template = initial_surface(cfg)?;
    let mut trace = FlowTrace::default();
    for row in rows {
        let path = dir.join("snapshots").join(snapshot_name(row.t));
        let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let (positions, _) = read_off(BufReader::new(file))?;
        let surface = surface_from_positions(&template, &positions, row.t)?;
        let mut sample = TraceSample::new(&surface, &compute_tensors(&surface)?);
        sample.lambda1 = row.lambda1;
        for (p, series) in &per_p {
            if *p == 2.0 {
                continue;
            }
            if let Some(r) = series.iter().find(|r| r.t == row.t) {
                sample.lambda1_p.push((*p, r.lambda1_p));
            }
        }
        trace.samples.push(sample);
    }
    Ok(trace)
}

/// Recomputes `names` on a completed run directory and merges them into its
/// report (replacing entries of the same name).
pub fn verify_run(dir: &Path, names: &[String]) -> Result<RunReport> {
    let cfg = crate::config::parse_config(&dir.join("config.toml"))?;
    let mut report = RunReport::read(dir)?;
    if report.status == RunStatus::Aborted {
        bail!("run in {} was aborted; nothing to verify", dir.display());
    }
    let trace = load_trace(&cfg, dir)?;
    let s0 = &trace.samples.first().context("run has no samples")?.snapshot;
    let alpha = resolve_alpha(&cfg, s0)?;
    let schedule = alpha.map(|a| PinchSchedule::new(cfg.dim(), a)).transpose()?;
    let ctx = CheckContext {
        cfg: &cfg,
        trace: &trace,
        alpha,
        schedule,
    };
    for fresh in run_checks(&ctx, names) {
        match report.checks.iter_mut().find(|c| c.name == fresh.name) {
            Some(slot) => *slot = fresh,
            None => report.checks.push(fresh),
        }
    }
    report.write(dir)?;
    fs::write(dir.join("summary.md"), render_summary(&report))?;
    Ok(report)
}

pub struct CheckContext<'a> {
    pub cfg: &'a ScenarioConfig,
    pub trace: &'a FlowTrace,
    pub alpha: Option<f64>,
    pub schedule: Option<PinchSchedule>,
}

/// Every check in `names`, in order, evaluated concurrently.
pub fn run_checks(ctx: &CheckContext<'_>, names: &[String]) -> Vec<CheckReport> {
    names
        .par_iter()
        .map(|name| match check(ctx, name) {
            Ok(r) => r,
            Err(e) => from_error(name, e),
        })
        .collect()
}

fn claim(name: &str) -> &'static str {
    match name {
        "area_growth" => "area grows as A(0) e^t",
        "epsilon_schedule" => "ε(t) schedule inequalities",
        "pinching_preserved" => "h ≥ ε(t) H g is preserved",
        "monotone" => "λ₁,ₚ(t) is non-increasing",
        "decay_bound" => "λ₁,ₚ(t) ≤ λ₁,ₚ(0) e^{−p ε₀ t}",
        "rescaled_monotone" => "e^{−p(1/n − ε₀)t} λ̃₁,ₚ(t) is non-increasing",
        "rescaled_schedule_bound" => "λ̃₁,ₚ(t) ≤ λ̃₁,ₚ(0) exp[p ∫ (1/n − ε)]",
        "evolution_identity" => "first variation of λ₁ along the flow",
        "isoperimetric_bound" => "λ₁,ₚ(M) ≥ C⁻¹ λ₁,ₚ(Sⁿ(R)) with |Sⁿ(R)| = |M|",
        "rounding" => "the rescaled surface becomes round",
        "h_decay" => "H decays like e^{−t/n}",
        _ => "",
    }
}

fn from_error(name: &str, e: anyhow::Error) -> CheckReport {
    let undecidable = matches!(
        e.downcast_ref::<Error>(),
        Some(Error::HypothesisViolation(_) | Error::InsufficientData { .. } | Error::DegenerateSpectrum(_))
    );
    if undecidable {
        CheckReport::inconclusive(name, claim(name), 0.0, e.to_string())
    } else {
        CheckReport::new(name, claim(name), f64::NAN, 0.0).fail_with(format!("error: {e}"))
    }
}

/// Worst margin of several per-exponent (or per-time) reports of one check.
fn combine(name: &str, parts: Vec<(String, CheckReport)>) -> CheckReport {
    if parts.len() == 1 {
        return parts.into_iter().next().unwrap().1;
    }
    let key = |r: &CheckReport| if r.margin.is_nan() { f64::INFINITY } else { r.margin };
    let worst = parts
        .iter()
        .map(|(_, r)| r)
        .min_by(|a, b| key(a).total_cmp(&key(b)))
        .unwrap();
    let mut out = worst.clone();
    out.name = name.to_string();
    out.status = if parts.iter().any(|(_, r)| r.status == CheckStatus::Fail) {
        CheckStatus::Fail
    } else if parts.iter().any(|(_, r)| r.status == CheckStatus::Inconclusive) {
        CheckStatus::Inconclusive
    } else {
        CheckStatus::Pass
    };
    out.pass = out.status == CheckStatus::Pass;
    let notes: Vec<String> = parts
        .iter()
        .map(|(label, r)| {
            let m = if r.margin.is_nan() {
                "n/a".into()
            } else {
                format!("{:.3e}", r.margin)
            };
            format!("[{label}] {} {m}: {}", r.status, r.note.as_deref().unwrap_or(""))
        })
        .collect();
    out.note = Some(notes.join("; "));
    out
}

fn per_p(ctx: &CheckContext<'_>, name: &str, f: impl Fn(f64) -> imcf_core::Result<CheckReport>) -> Result<CheckReport> {
    let parts = ctx
        .cfg
        .p
        .iter()
        .map(|&p| {
            let r = f(p)
                .map_err(anyhow::Error::from)
                .unwrap_or_else(|e| from_error(name, e));
            (format!("p={p}"), r)
        })
        .collect();
    Ok(combine(name, parts))
}

fn imcf_only(ctx: &CheckContext<'_>, name: &str) -> Option<CheckReport> {
    (ctx.cfg.speed != Speed::Imcf).then(|| {
        CheckReport::inconclusive(
            name,
            claim(name),
            0.0,
            "the claim concerns inverse mean curvature flow; this run used another speed",
        )
    })
}

fn require_schedule<'a>(ctx: &'a CheckContext<'_>) -> Result<&'a PinchSchedule> {
    ctx.schedule.as_ref().ok_or_else(|| {
        Error::HypothesisViolation("the initial surface admits no positive pinching constant α".into()).into()
    })
}

fn check(ctx: &CheckContext<'_>, name: &str) -> Result<CheckReport> {
    let cfg = ctx.cfg;
    let tol = &cfg.tolerances;
    let trace = ctx.trace;
    let n = cfg.dim();
    let eps0 = ctx.alpha.unwrap_or(0.0) / 2.0;
    if name != "epsilon_schedule" && name != "evolution_identity" && name != "isoperimetric_bound" {
        if let Some(r) = imcf_only(ctx, name) {
            return Ok(r);
        }
    }
    let r = match name {
        "area_growth" => check_area_growth(trace, tol.area)?,
        "epsilon_schedule" => {
            let s = require_schedule(ctx)?;
            let t0 = trace.samples.first().map_or(0.0, |s| s.t);
            let grid: Vec<f64> = trace.samples.iter().map(|s| s.t - t0).collect();
            epsilon_props(s, &grid, tol.arithmetic)?
        }
        "pinching_preserved" => check_pinching_preserved(trace, require_schedule(ctx)?, tol.pinching)?,
        "monotone" => per_p(ctx, name, |p| check_monotone(&trace.lambda_series(p), tol.monotone))?,
        "decay_bound" => per_p(ctx, name, |p| {
            check_decay_bound(&trace.lambda_series(p), n, p, eps0, tol.decay)
        })?,
        "rescaled_monotone" => per_p(ctx, name, |p| {
            check_rescaled_monotone(&trace.rescaled_series(p), n, p, eps0, tol.monotone)
        })?,
        "rescaled_schedule_bound" => {
            let s = require_schedule(ctx)?;
            per_p(ctx, name, |p| {
                check_rescaled_schedule_bound(&trace.rescaled_series(p), p, s, tol.decay)
            })?
        }
        "evolution_identity" => evolution(ctx)?,
        "isoperimetric_bound" => {
            let s0 = &trace.samples.first().context("run has no samples")?.snapshot;
            per_p(ctx, name, |p| {
                check_isoperimetric_bound(s0, p, &cfg.plaplace_for(p), cfg.eigen_tol, tol.isoperimetric).map(|(r, _)| r)
            })?
        }
        "rounding" => check_rounding(trace, tol.rounding_transient, tol.rounding_r2)?,
        "h_decay" => check_h_decay(trace, tol.h_decay)?,
        other => bail!("unknown check `{other}`"),
    };
    Ok(r)
}

/// Richardson-extrapolated first variation at the first and last sample.
fn evolution(ctx: &CheckContext<'_>) -> Result<CheckReport> {
    let cfg = ctx.cfg;
    let tol = if matches!(cfg.shape, RadialProfile::Sphere { .. }) {
        cfg.tolerances.evolution_sphere
    } else {
        cfg.tolerances.evolution
    };
    let speed = cfg.speed.function();
    let (Some(first), Some(last)) = (ctx.trace.samples.first(), ctx.trace.last()) else {
        return Err(Error::InsufficientData { needed: 1, got: 0 }.into());
    };
    let mut at = vec![first];
    if last.t != first.t {
        at.push(last);
    }
    let parts = at
        .into_iter()
        .map(|s| {
            // Relative radius change per unit time is 1/n under IMCF and
            // n/r² under MCF.
            let dt = match cfg.speed {
                Speed::Imcf => 1e-3,
                Speed::Mcf => 1e-4 * s.mean_radius * s.mean_radius,
            };
            let mut r = match evolution_residual_richardson(&s.snapshot, &speed, dt, cfg.eigen_tol, tol) {
                Ok((r, _)) => r,
                Err(e) => from_error("evolution_identity", e.into()),
            };
            r.name = "evolution_identity".into();
            (format!("t={}", s.t), r)
        })
        .collect();
    Ok(combine("evolution_identity", parts))
}
