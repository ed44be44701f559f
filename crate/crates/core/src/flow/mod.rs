//! Explicit time stepping of normal-speed flows `dX/dt = f ν`.
//!
//! Vertices move along their fixed atlas direction. A radial velocity `dr/dt`
//! has normal component `(dr/dt) / v`, so the update `r += Δt · v · f`
//! realizes normal speed `f` while keeping the direction atlas intact.

mod decay;
mod rescale;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{compute_tensors, total_area, GeometryTensors, StarSurface};

pub use decay::{fit_h_decay, fit_h_decay_after, HDecayFit, MIN_DECAY_SAMPLES};
pub(crate) use decay::{linear_fit, r_squared};
pub use rescale::{eigen_rescale, rescale_snapshot, sphericity};

/// Normal speed as a function of `(H, |A|²)`.
#[derive(Clone)]
pub enum SpeedFunction {
    /// `f = 1 / H`.
    Imcf,
    /// `f = -H`.
    Mcf,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for SpeedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedFunction::Imcf => write!(f, "Imcf"),
            SpeedFunction::Mcf => write!(f, "Mcf"),
            SpeedFunction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl SpeedFunction {
    pub fn eval(&self, h: f64, norm_a2: f64) -> f64 {
        match self {
            SpeedFunction::Imcf => 1.0 / h,
            SpeedFunction::Mcf => -h,
            SpeedFunction::Custom(f) => f(h, norm_a2),
        }
    }

    /// Per-vertex speed on the given tensors.
    pub fn values(&self, tensors: &GeometryTensors) -> Vec<f64> {
        tensors
            .mean_curvature
            .iter()
            .zip(&tensors.norm_a2)
            .map(|(&h, &a2)| self.eval(h, a2))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DtPolicy {
    Fixed(f64),
    /// `Δt = c · min_i (spacing_i · H_i)²`.
    Cfl(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    pub dt: DtPolicy,
    pub t_end: f64,
    pub sample_interval: f64,
    /// Abort threshold for `H` under IMCF; `None` uses `1e-6 · n / mean r`.
    pub h_min_abort: Option<f64>,
    /// Sectional curvature of the ambient space form. Only 0 is supported.
    pub ambient_curvature: f64,
}

impl FlowConfig {
    pub fn new(dt: DtPolicy, t_end: f64, sample_interval: f64) -> Self {
        FlowConfig {
            dt,
            t_end,
            sample_interval,
            h_min_abort: None,
            ambient_curvature: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.dt {
            DtPolicy::Fixed(dt) | DtPolicy::Cfl(dt) if !(dt > 0.0 && dt.is_finite()) => {
                return invalid(format!("time step parameter {dt} must be positive"))
            }
            _ => {}
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval <= self.t_end) {
            return invalid(format!(
                "sample_interval = {} must lie in (0, t_end]",
                self.sample_interval
            ));
        }
        if self.ambient_curvature != 0.0 {
            return invalid("only Euclidean ambient space (K = 0) is supported");
        }
        Ok(())
    }
}

/// One sampled state of a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub area: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub h_mean: f64,
    pub mean_radius: f64,
    /// Scale-invariant, so identical for the rescaled surface.
    pub sphericity: f64,
    pub snapshot: StarSurface,
    pub lambda1: Option<f64>,
    /// `(p, λ₁,ₚ)` pairs filled by observers.
    pub lambda1_p: Vec<(f64, f64)>,
    pub pinch_margin: Option<f64>,
    pub eps_t: Option<f64>,
}

impl TraceSample {
    pub fn new(surface: &StarSurface, tensors: &GeometryTensors) -> Self {
        TraceSample {
            t: surface.t(),
            area: total_area(surface, tensors),
            h_min: tensors.h_min(),
            h_max: tensors.h_max(),
            h_mean: tensors.h_mean(),
            mean_radius: surface.mean_radius(),
            sphericity: sphericity(surface),
            snapshot: surface.clone(),
            lambda1: None,
            lambda1_p: Vec::new(),
            pinch_margin: None,
            eps_t: None,
        }
    }

    pub fn lambda_p(&self, p: f64) -> Option<f64> {
        if p == 2.0 && self.lambda1.is_some() {
            return self.lambda1;
        }
        self.lambda1_p.iter().find(|(q, _)| *q == p).map(|&(_, l)| l)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowTrace {
    pub samples: Vec<TraceSample>,
    pub steps: usize,
}

impl FlowTrace {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&TraceSample> {
        self.samples.last()
    }

    /// `(t, λ₁,ₚ)` over the samples that recorded it.
    pub fn lambda_series(&self, p: f64) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .filter_map(|s| s.lambda_p(p).map(|l| (s.t, l)))
            .collect()
    }

    /// `(t, e^{pt/n} λ₁,ₚ)`: the eigenvalue of the rescaled surface.
    pub fn rescaled_series(&self, p: f64) -> Vec<(f64, f64)> {
        let Some(n) = self.samples.first().map(|s| s.snapshot.dim()) else {
            return Vec::new();
        };
        self.lambda_series(p)
            .into_iter()
            .map(|(t, l)| (t, eigen_rescale(l, t, n, p)))
            .collect()
    }
}

/// Hook invoked at every sample (spectral solves, pinching margins, ...).
pub trait Observer {
    fn observe(&mut self, sample: &mut TraceSample, tensors: &GeometryTensors) -> Result<()>;
}

impl<F> Observer for F
where
    F: FnMut(&mut TraceSample, &GeometryTensors) -> Result<()>,
{
    fn observe(&mut self, sample: &mut TraceSample, tensors: &GeometryTensors) -> Result<()> {
        self(sample, tensors)
    }
}

fn default_floor(surface: &StarSurface) -> f64 {
    1e-6 * surface.dim() as f64 / surface.mean_radius()
}

/// One explicit Euler step `r_i ← r_i + Δt · v_i · f(H_i, |A|²_i)`.
pub fn step(surface: &StarSurface, tensors: &GeometryTensors, speed: &SpeedFunction, dt: f64) -> Result<StarSurface> {
    step_with_floor(surface, tensors, speed, dt, default_floor(surface))
}

pub fn step_with_floor(
    surface: &StarSurface,
    tensors: &GeometryTensors,
    speed: &SpeedFunction,
    dt: f64,
    h_floor: f64,
) -> Result<StarSurface> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid(format!("time step {dt} must be positive"));
    }
    if matches!(speed, SpeedFunction::Imcf) {
        if let Some((vertex, &h)) = tensors.mean_curvature.iter().enumerate().find(|(_, &h)| !(h > h_floor)) {
            return Err(Error::CurvatureCollapse {
                vertex,
                h,
                floor: h_floor,
                t: surface.t(),
            });
        }
    }
    let t = surface.t() + dt;
    let mut radii = Vec::with_capacity(surface.len());
    for (i, &r) in surface.radii().iter().enumerate() {
        let f = speed.eval(tensors.mean_curvature[i], tensors.norm_a2[i]);
        let next = r + dt * tensors.graph_factor[i] * f;
        if !next.is_finite() {
            return Err(Error::NumericalBlowup {
                t,
                what: format!("radius at vertex {i} is {next}"),
            });
        }
        if next <= 0.0 {
            return Err(Error::StarShapeLoss { vertex: i, r: next, t });
        }
        radii.push(next);
    }
    surface.with_radii(radii, t)
}

fn policy_dt(policy: DtPolicy, tensors: &GeometryTensors) -> f64 {
    match policy {
        DtPolicy::Fixed(dt) => dt,
        DtPolicy::Cfl(c) => {
            let m = tensors
                .spacing
                .iter()
                .zip(&tensors.mean_curvature)
                .map(|(s, h)| (s * h.abs()).powi(2))
                .fold(f64::INFINITY, f64::min);
            c * m
        }
    }
}

/// Integrates from `surface0.t()` to `t_end`, sampling every
/// `sample_interval` (and at `t_end`). Returns the trace gathered so far
/// together with the error that stopped the run, if any.
pub fn run_partial(
    surface0: &StarSurface,
    speed: &SpeedFunction,
    config: &FlowConfig,
    observers: &mut [&mut dyn Observer],
) -> (FlowTrace, Option<Error>) {
    let mut trace = FlowTrace::default();
    let result = integrate(surface0, speed, config, observers, &mut trace);
    (trace, result.err())
}

/// Like [`run_partial`] but discards the partial trace on error.
pub fn run(
    surface0: &StarSurface,
    speed: &SpeedFunction,
    config: &FlowConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<FlowTrace> {
    match run_partial(surface0, speed, config, observers) {
        (trace, None) => Ok(trace),
        (_, Some(e)) => Err(e),
    }
}

fn integrate(
    surface0: &StarSurface,
    speed: &SpeedFunction,
    config: &FlowConfig,
    observers: &mut [&mut dyn Observer],
    trace: &mut FlowTrace,
) -> Result<()> {
    config.validate()?;
    let t0 = surface0.t();
    let mut surface = surface0.clone();
    let mut tensors = compute_tensors(&surface)?;
    if matches!(speed, SpeedFunction::Imcf) {
        if let Some((i, h)) = tensors.mean_curvature.iter().enumerate().find(|(_, h)| !(**h > 0.0)) {
            return Err(Error::HypothesisViolation(format!(
                "inverse mean curvature flow needs H > 0; H[{i}] = {h}"
            )));
        }
    }

    let mut record = |surface: &StarSurface, tensors: &GeometryTensors, trace: &mut FlowTrace| {
        let mut sample = TraceSample::new(surface, tensors);
        for obs in observers.iter_mut() {
            obs.observe(&mut sample, tensors)?;
        }
        check_finite(&sample)?;
        trace.samples.push(sample);
        Ok::<(), Error>(())
    };
    record(&surface, &tensors, trace)?;

    let t_end = t0 + config.t_end;
    let mut k = 1usize;
    loop {
        let target = (t0 + k as f64 * config.sample_interval).min(t_end);
        let h_floor = config.h_min_abort.unwrap_or_else(|| default_floor(&surface));
        let mut dt = policy_dt(config.dt, &tensors);
        let snap = surface.t() + dt >= target - 1e-12 * target.max(1.0);
        if snap {
            dt = target - surface.t();
        }
        let mut next = step_with_floor(&surface, &tensors, speed, dt, h_floor)?;
        if snap {
            next = next.with_radii(next.radii().to_vec(), target)?;
        }
        surface = next;
        tensors = compute_tensors(&surface)?;
        trace.steps += 1;
        if let Some(h) = tensors.mean_curvature.iter().find(|h| !h.is_finite()) {
            return Err(Error::NumericalBlowup {
                t: surface.t(),
                what: format!("mean curvature {h}"),
            });
        }
        if snap {
            record(&surface, &tensors, trace)?;
            if target >= t_end {
                return Ok(());
            }
            k += 1;
        }
    }
}

fn check_finite(s: &TraceSample) -> Result<()> {
    let mut vals = vec![s.area, s.h_min, s.h_max, s.mean_radius, s.sphericity];
    vals.extend(s.lambda1);
    vals.extend(s.lambda1_p.iter().map(|x| x.1));
    vals.extend(s.pinch_margin);
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup {
            t: s.t,
            what: "non-finite sampled quantity".into(),
        })
    }
}
