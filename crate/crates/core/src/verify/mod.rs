//! Tolerance-bearing checks of the pinching, monotonicity, decay, evolution
//! and isoperimetric statements along an inverse mean curvature flow.
//!
//! Every check returns a [`CheckReport`] whose `margin` is signed slack:
//! positive means the claim holds with room to spare, and the check passes
//! when `margin ≥ −tolerance`.

mod evolution;
mod isoperimetric;
mod monotone;
mod observer;
mod pinching;
mod schedule;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::flow::FlowTrace;

pub use evolution::{evolution_residual, evolution_residual_richardson, evolution_rhs, EvolutionDetail};
pub use isoperimetric::{check_isoperimetric_bound, convergence_radius, isoperimetric_constant, IsoperimetricDetail};
pub use monotone::{
    check_area_growth, check_decay_bound, check_h_decay, check_monotone, check_rescaled_monotone,
    check_rescaled_schedule_bound, check_rounding, fit_rounding, RoundingFit,
};
pub use observer::{PinchingObserver, SpectralObserver};
pub use pinching::{alpha_max, check_pinching_preserved, pinching_margin};
pub use schedule::{epsilon_props, PinchSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The data cannot decide the claim (e.g. an unresolved eigenvalue
    /// cluster); never counted as a failure.
    Inconclusive,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    /// The statement being checked, in words.
    pub claim: String,
    /// NaN (written as `null`) when the check is inconclusive.
    #[serde(deserialize_with = "null_as_nan")]
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub status: CheckStatus,
    /// `(t_first, t_last)` of the samples the check looked at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl CheckReport {
    /// Pass iff `margin ≥ −tolerance`. A NaN margin fails.
    pub fn new(name: impl Into<String>, claim: impl Into<String>, margin: f64, tolerance: f64) -> Self {
        let pass = margin >= -tolerance;
        CheckReport {
            name: name.into(),
            claim: claim.into(),
            margin,
            tolerance,
            pass,
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            t_range: None,
            note: None,
        }
    }

    pub fn inconclusive(
        name: impl Into<String>,
        claim: impl Into<String>,
        tolerance: f64,
        why: impl Into<String>,
    ) -> Self {
        CheckReport {
            name: name.into(),
            claim: claim.into(),
            margin: f64::NAN,
            tolerance,
            pass: false,
            status: CheckStatus::Inconclusive,
            t_range: None,
            note: Some(why.into()),
        }
    }

    /// Forces a failure regardless of the margin (e.g. a violated side
    /// condition).
    pub fn fail_with(mut self, why: impl Into<String>) -> Self {
        self.pass = false;
        self.status = CheckStatus::Fail;
        self.note = Some(why.into());
        self
    }

    pub fn with_range(mut self, t0: f64, t1: f64) -> Self {
        self.t_range = Some((t0, t1));
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub(crate) fn over(self, trace: &FlowTrace) -> Self {
        match (trace.samples.first(), trace.samples.last()) {
            (Some(a), Some(b)) => self.with_range(a.t, b.t),
            _ => self,
        }
    }
}

/// Default tolerances; each can be overridden from a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Pure arithmetic identities (ε-schedule).
    pub arithmetic: f64,
    /// Relative increase allowed per step in monotone series.
    pub monotone: f64,
    /// Relative slack on the exponential decay bounds.
    pub decay: f64,
    /// Pinching margin, as a fraction of the mean `H`.
    pub pinching: f64,
    /// `|log(A/A₀) − t|`.
    pub area: f64,
    /// Relative mismatch in the evolution identity on spheres.
    pub evolution_sphere: f64,
    /// Relative mismatch in the evolution identity elsewhere.
    pub evolution: f64,
    /// Relative slack in the eigenvalue comparison with the area-matched
    /// sphere.
    pub isoperimetric: f64,
    /// Relative deviation of the fitted `log H` slope from `−1/n`.
    pub h_decay: f64,
    /// Minimum `R²` of the log-sphericity fit.
    pub rounding_r2: f64,
    /// Samples with `t` below this are skipped by the rounding fit.
    pub rounding_transient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            arithmetic: 1e-12,
            monotone: 1e-4,
            decay: 0.01,
            pinching: 0.02,
            area: 0.01,
            evolution_sphere: 0.02,
            evolution: 0.05,
            isoperimetric: 0.005,
            h_decay: 0.01,
            rounding_r2: 0.9,
            rounding_transient: 0.5,
        }
    }
}
