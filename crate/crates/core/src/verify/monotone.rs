use serde::{Deserialize, Serialize};

use super::{CheckReport, PinchSchedule};
use crate::error::{invalid, Error, Result};
use crate::flow::{fit_h_decay, linear_fit, r_squared, FlowTrace, MIN_DECAY_SAMPLES};

fn range(series: &[(f64, f64)]) -> (f64, f64) {
    (series[0].0, series[series.len() - 1].0)
}

fn check_eps0(n: usize, eps0: f64) -> Result<()> {
    let top = 1.0 / n as f64;
    if !(0.0..=top).contains(&eps0) {
        return invalid(format!("ε₀ = {eps0} must lie in [0, {top}]"));
    }
    Ok(())
}

/// Largest relative step-to-step increase, negated: `−max_k (λ_{k+1} − λ_k) / λ_k`.
fn monotone_margin(series: &[(f64, f64)]) -> Result<(f64, f64)> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    if let Some((t, l)) = series.iter().find(|(_, l)| !(*l > 0.0)) {
        return Err(Error::DataError(format!("nonpositive eigenvalue {l} at t = {t}")));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut at = series[0].0;
    for w in series.windows(2) {
        let rise = (w[1].1 - w[0].1) / w[0].1;
        if rise > worst {
            worst = rise;
            at = w[1].0;
        }
    }
    Ok((-worst, at))
}

/// `λ(t)` non-increasing, up to a relative rise of `tol` per step.
pub fn check_monotone(series: &[(f64, f64)], tol: f64) -> Result<CheckReport> {
    let (margin, at) = monotone_margin(series)?;
    let (t0, t1) = range(series);
    Ok(
        CheckReport::new("monotone", "λ₁,ₚ(t) is non-increasing along the flow", margin, tol)
            .with_range(t0, t1)
            .with_note(format!("largest relative step change at t = {at}")),
    )
}

/// `λ(t) ≤ λ(t₀) e^{−p ε₀ (t − t₀)}`; margin is the smallest relative slack.
pub fn check_decay_bound(series: &[(f64, f64)], n: usize, p: f64, eps0: f64, tol: f64) -> Result<CheckReport> {
    check_eps0(n, eps0)?;
    if series.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let (t0, l0) = series[0];
    let margin = series
        .iter()
        .map(|&(t, l)| {
            let bound = l0 * (-p * eps0 * (t - t0)).exp();
            (bound - l) / bound
        })
        .fold(f64::INFINITY, f64::min);
    let (_, t1) = range(series);
    Ok(CheckReport::new(
        "decay_bound",
        "λ₁,ₚ(t) ≤ λ₁,ₚ(0) e^{−p ε₀ t} with constant ε₀ = α/2",
        margin,
        tol,
    )
    .with_range(t0, t1)
    .with_note(format!("p = {p}, ε₀ = {eps0}")))
}

/// `e^{−p(1/n − ε₀)t} λ̃(t)` non-increasing.
pub fn check_rescaled_monotone(series: &[(f64, f64)], n: usize, p: f64, eps0: f64, tol: f64) -> Result<CheckReport> {
    check_eps0(n, eps0)?;
    let rate = p * (1.0 / n as f64 - eps0);
    let q: Vec<(f64, f64)> = series.iter().map(|&(t, l)| (t, (-rate * t).exp() * l)).collect();
    let (margin, at) = monotone_margin(&q)?;
    let (t0, t1) = range(series);
    Ok(CheckReport::new(
        "rescaled_monotone",
        "e^{−p(1/n − ε₀)t} λ̃₁,ₚ(t) is non-increasing under the rescaled flow",
        margin,
        tol,
    )
    .with_range(t0, t1)
    .with_note(format!(
        "p = {p}, ε₀ = {eps0}, largest relative step change at t = {at}"
    )))
}

/// `λ̃(t) ≤ λ̃(t₀) exp[p ∫ (1/n − ε(s)) ds]` with the time-dependent schedule.
pub fn check_rescaled_schedule_bound(
    series: &[(f64, f64)],
    p: f64,
    schedule: &PinchSchedule,
    tol: f64,
) -> Result<CheckReport> {
    if series.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let (t0, l0) = series[0];
    let margin = series
        .iter()
        .map(|&(t, l)| {
            let bound = l0 * (p * schedule.deficit_integral(t - t0)).exp();
            (bound - l) / bound
        })
        .fold(f64::INFINITY, f64::min);
    let (_, t1) = range(series);
    Ok(CheckReport::new(
        "rescaled_schedule_bound",
        "λ̃₁,ₚ(t) ≤ λ̃₁,ₚ(0) exp[p ∫₀ᵗ (1/n − ε(s)) ds] with the schedule ε(t)",
        margin,
        tol,
    )
    .with_range(t0, t1)
    .with_note(format!("p = {p}, α = {}", schedule.alpha)))
}

/// `|log(A_k / A_0) − (t_k − t_0)| ≤ tol` under IMCF.
pub fn check_area_growth(trace: &FlowTrace, tol: f64) -> Result<CheckReport> {
    let Some(first) = trace.samples.first() else {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    };
    let mut dev = 0.0f64;
    let mut at = first.t;
    for s in &trace.samples {
        let d = ((s.area / first.area).ln() - (s.t - first.t)).abs();
        if d > dev {
            dev = d;
            at = s.t;
        }
    }
    Ok(CheckReport::new(
        "area_growth",
        "area grows as A(0) e^t under inverse mean curvature flow (f H ≡ 1)",
        -dev,
        tol,
    )
    .over(trace)
    .with_note(format!("largest |log(A/A₀) − t| at t = {at}")))
}

/// Fitted `log H` slope against the sphere rate `−1/n`; the comparison with
/// the `e^{−t}` rate is reported in the note but not asserted.
pub fn check_h_decay(trace: &FlowTrace, tol: f64) -> Result<CheckReport> {
    let fit = fit_h_decay(trace)?;
    let rate = fit.sphere_rate();
    let (c1, c2) = fit.constants();
    Ok(CheckReport::new(
        "h_decay",
        "C₁e^{−t/n} ≤ H ≤ C₂e^{−t/n}: fitted log H slope equals −1/n",
        -fit.rel_dev(rate),
        tol,
    )
    .over(trace)
    .with_note(format!(
        "slope {:.6} (max {:.6}, min {:.6}); vs −1/n = {rate}: deviation {:.3e}; \
         vs the e^{{−t}} rate: deviation {:.3e}{}; C₁ = {c1:.4}, C₂ = {c2:.4}",
        fit.slope(),
        fit.slope_max,
        fit.slope_min,
        fit.rel_dev(rate),
        fit.rel_dev(-1.0),
        if fit.n > 1 {
            " (discrepancy: the e^{−t} rate holds only for n = 1)"
        } else {
            ""
        },
    )))
}

/// Log-linear fit of sphericity on the window `t ≥ t_start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingFit {
    pub slope: f64,
    pub r_squared: f64,
    pub initial: f64,
    pub final_value: f64,
    pub samples: usize,
    /// Every sample had sphericity below `1e-12`.
    pub round: bool,
}

impl RoundingFit {
    pub fn ratio(&self) -> f64 {
        self.final_value / self.initial
    }
}

pub fn fit_rounding(trace: &FlowTrace, t_start: f64) -> Result<RoundingFit> {
    let all: Vec<(f64, f64)> = trace.samples.iter().map(|s| (s.t, s.sphericity)).collect();
    let pts: Vec<(f64, f64)> = all.iter().cloned().filter(|(t, _)| *t >= t_start).collect();
    if pts.len() < MIN_DECAY_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_DECAY_SAMPLES,
            got: pts.len(),
        });
    }
    let initial = all[0].1;
    let final_value = all[all.len() - 1].1;
    if all.iter().all(|(_, s)| *s < 1e-12) {
        return Ok(RoundingFit {
            slope: 0.0,
            r_squared: 1.0,
            initial,
            final_value,
            samples: pts.len(),
            round: true,
        });
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.max(1e-300).ln()).collect();
    let (slope, _, _) = linear_fit(&t, &y);
    Ok(RoundingFit {
        slope,
        r_squared: r_squared(&t, &y),
        initial,
        final_value,
        samples: pts.len(),
        round: false,
    })
}

/// Sphericity decays exponentially after `transient`: negative log slope with
/// `R² ≥ r2_min` and a final value below the first post-transient one.
pub fn check_rounding(trace: &FlowTrace, transient: f64, r2_min: f64) -> Result<CheckReport> {
    let t_start = trace.samples.first().map_or(0.0, |s| s.t) + transient;
    let fit = fit_rounding(trace, t_start)?;
    let claim = "the rescaled surface converges exponentially fast to a round sphere";
    if fit.round {
        return Ok(CheckReport::new("rounding", claim, 0.0, 0.0)
            .over(trace)
            .with_note("round at every sample"));
    }
    let report = CheckReport::new("rounding", claim, -fit.slope, 0.0)
        .over(trace)
        .with_note(format!(
            "log-sphericity slope {:.4} (R² = {:.4}) after t = {t_start}; sphericity {:.3e} → {:.3e} (ratio {:.3})",
            fit.slope,
            fit.r_squared,
            fit.initial,
            fit.final_value,
            fit.ratio()
        ));
    let post = trace
        .samples
        .iter()
        .find(|s| s.t >= t_start)
        .map_or(fit.initial, |s| s.sphericity);
    if fit.r_squared < r2_min {
        let note = report.note.clone().unwrap_or_default();
        return Ok(report.fail_with(format!("{note}; R² below {r2_min}")));
    }
    if fit.final_value >= post {
        let note = report.note.clone().unwrap_or_default();
        return Ok(report.fail_with(format!("{note}; no decrease after the transient")));
    }
    Ok(report)
}
