use serde::{Deserialize, Serialize};

use super::FlowTrace;
use crate::error::{Error, Result};

pub const MIN_DECAY_SAMPLES: usize = 10;

/// Least-squares fits of `log H_max` and `log H_min` against `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HDecayFit {
    pub n: usize,
    pub slope_max: f64,
    pub slope_min: f64,
    pub intercept_max: f64,
    pub intercept_min: f64,
    /// RMS residual of the two fits combined.
    pub residual: f64,
    pub samples: usize,
}

impl HDecayFit {
    /// Mean of the two slopes.
    pub fn slope(&self) -> f64 {
        0.5 * (self.slope_max + self.slope_min)
    }

    /// Rate of the exact sphere solution, `-1/n`.
    pub fn sphere_rate(&self) -> f64 {
        -1.0 / self.n as f64
    }

    pub fn rel_dev(&self, rate: f64) -> f64 {
        ((self.slope() - rate) / rate).abs()
    }

    /// `C₁ = e^{intercept_min}`, `C₂ = e^{intercept_max}`.
    pub fn constants(&self) -> (f64, f64) {
        (self.intercept_min.exp(), self.intercept_max.exp())
    }
}

pub fn fit_h_decay(trace: &FlowTrace) -> Result<HDecayFit> {
    fit_h_decay_after(trace, f64::NEG_INFINITY)
}

/// Fit restricted to samples with `t ≥ t_start`.
pub fn fit_h_decay_after(trace: &FlowTrace, t_start: f64) -> Result<HDecayFit> {
    let pts: Vec<_> = trace.samples.iter().filter(|s| s.t >= t_start).collect();
    if pts.len() < MIN_DECAY_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_DECAY_SAMPLES,
            got: pts.len(),
        });
    }
    if let Some(s) = pts.iter().find(|s| !(s.h_min > 0.0)) {
        return Err(Error::HypothesisViolation(format!(
            "H_min = {} at t = {}; decay fit needs H > 0",
            s.h_min, s.t
        )));
    }
    let t: Vec<f64> = pts.iter().map(|s| s.t).collect();
    let hi: Vec<f64> = pts.iter().map(|s| s.h_max.ln()).collect();
    let lo: Vec<f64> = pts.iter().map(|s| s.h_min.ln()).collect();
    let (sm, im, rm) = linear_fit(&t, &hi);
    let (sn, inn, rn) = linear_fit(&t, &lo);
    Ok(HDecayFit {
        n: trace.samples[0].snapshot.dim(),
        slope_max: sm,
        slope_min: sn,
        intercept_max: im,
        intercept_min: inn,
        residual: (0.5 * (rm * rm + rn * rn)).sqrt(),
        samples: pts.len(),
    })
}

/// Ordinary least squares `y ≈ a x + b`; returns `(a, b, rms residual)`.
pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - icpt).powi(2)).sum();
    (slope, icpt, (ss / n).sqrt())
}

/// Coefficient of determination of the least-squares line.
pub(crate) fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let (a, b, _) = linear_fit(x, y);
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let res: f64 = x.iter().zip(y).map(|(u, v)| (v - a * u - b).powi(2)).sum();
    if tot == 0.0 {
        1.0
    } else {
        1.0 - res / tot
    }
}
