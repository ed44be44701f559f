//! Scenario files (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use imcf_core::spectral::PLaplaceConfig;
use imcf_core::{AtlasKind, DtPolicy, RadialProfile, SpeedFunction, Tolerances};
use serde::{Deserialize, Serialize};

/// Every check a scenario can request, in report order.
pub const CHECKS: [&str; 11] = [
    "area_growth",
    "epsilon_schedule",
    "pinching_preserved",
    "monotone",
    "decay_bound",
    "rescaled_monotone",
    "rescaled_schedule_bound",
    "evolution_identity",
    "isoperimetric_bound",
    "rounding",
    "h_decay",
];

pub const DEFAULT_CFL: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Curve,
    Surface,
}

impl Backend {
    pub fn dim(self) -> usize {
        match self {
            Backend::Curve => 1,
            Backend::Surface => 2,
        }
    }

    pub fn atlas_kind(self) -> AtlasKind {
        match self {
            Backend::Curve => AtlasKind::Circle,
            Backend::Surface => AtlasKind::Icosphere,
        }
    }

    fn default_resolution(self) -> usize {
        match self {
            Backend::Curve => 256,
            Backend::Surface => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speed {
    Imcf,
    Mcf,
}

impl Speed {
    pub fn function(self) -> SpeedFunction {
        match self {
            Speed::Imcf => SpeedFunction::Imcf,
            Speed::Mcf => SpeedFunction::Mcf,
        }
    }
}

/// `"auto"` or a number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Value(f64),
    Keyword(String),
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::Keyword("auto".into())
    }
}

impl Alpha {
    pub fn explicit(&self) -> Option<f64> {
        match self {
            Alpha::Value(a) => Some(*a),
            Alpha::Keyword(_) => None,
        }
    }
}

/// `"all"` or a list of check names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checks {
    List(Vec<String>),
    Keyword(String),
}

impl Default for Checks {
    fn default() -> Self {
        Checks::Keyword("all".into())
    }
}

/// Check names in report order, without duplicates.
pub fn resolve_checks(names: &[String]) -> Result<Vec<String>> {
    if let Some(bad) = names.iter().find(|n| *n != "all" && !CHECKS.contains(&n.as_str())) {
        bail!("unknown check `{bad}` (known: all, {})", CHECKS.join(", "));
    }
    if names.iter().any(|n| n == "all") {
        return Ok(CHECKS.iter().map(|s| s.to_string()).collect());
    }
    Ok(CHECKS
        .iter()
        .filter(|c| names.iter().any(|n| n == *c))
        .map(|s| s.to_string())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub backend: Backend,
    pub shape: RadialProfile,
    /// Icosphere level or number of circle points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default = "default_speed")]
    pub speed: Speed,
    /// Fixed time step. Mutually exclusive with `cfl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Adaptive step factor, `Δt = cfl · min(spacing · H)²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_interval: Option<f64>,
    #[serde(default = "default_p")]
    pub p: Vec<f64>,
    #[serde(default)]
    pub alpha: Alpha,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Seeds the p-solver restarts.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eigen_tol")]
    pub eigen_tol: f64,
    #[serde(default)]
    pub plaplace: PLaplaceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_speed() -> Speed {
    Speed::Imcf
}

fn default_p() -> Vec<f64> {
    vec![2.0]
}

fn default_eigen_tol() -> f64 {
    1e-10
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn dim(&self) -> usize {
        self.backend.dim()
    }

    pub fn resolution(&self) -> usize {
        self.resolution.unwrap_or(self.backend.default_resolution())
    }

    pub fn dt_policy(&self) -> DtPolicy {
        match (self.dt, self.cfl) {
            (Some(dt), _) => DtPolicy::Fixed(dt),
            (None, c) => DtPolicy::Cfl(c.unwrap_or(DEFAULT_CFL)),
        }
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval.unwrap_or(self.t_end / 50.0)
    }

    pub fn check_names(&self) -> Vec<String> {
        match &self.checks {
            Checks::Keyword(k) => resolve_checks(std::slice::from_ref(k)).unwrap_or_default(),
            Checks::List(l) => resolve_checks(l).unwrap_or_default(),
        }
    }

    /// Solver settings for exponent `p`, seeded from the scenario seed.
    pub fn plaplace_for(&self, p: f64) -> PLaplaceConfig {
        PLaplaceConfig {
            p,
            seed: self.seed,
            ..self.plaplace.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            bail!("t_end = {} must be positive", self.t_end);
        }
        let si = self.sample_interval();
        if !(si > 0.0 && si <= self.t_end) {
            bail!("sample_interval = {si} must lie in (0, t_end = {}]", self.t_end);
        }
        if self.dt.is_some() && self.cfl.is_some() {
            bail!("dt and cfl are mutually exclusive");
        }
        match self.dt_policy() {
            DtPolicy::Fixed(v) | DtPolicy::Cfl(v) if !(v > 0.0 && v.is_finite()) => {
                bail!("time step parameter {v} must be positive")
            }
            _ => {}
        }
        if self.p.is_empty() {
            bail!("p must list at least one exponent");
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 1.0 && p.is_finite())) {
            bail!("p = {p} must exceed 1");
        }
        match &self.alpha {
            Alpha::Value(a) => {
                let top = 2.0 / n as f64;
                if !(*a > 0.0 && *a <= top) {
                    bail!("alpha = {a} must lie in (0, 2/n] = (0, {top}] for n = {n}");
                }
            }
            Alpha::Keyword(k) if k != "auto" => bail!("alpha must be \"auto\" or a number, got \"{k}\""),
            Alpha::Keyword(_) => {}
        }
        match &self.checks {
            Checks::Keyword(k) if k != "all" => bail!("checks must be \"all\" or a list, got \"{k}\""),
            Checks::Keyword(_) => {}
            Checks::List(l) => {
                resolve_checks(l)?;
            }
        }
        if !(self.eigen_tol > 0.0) {
            bail!("eigen_tol = {} must be positive", self.eigen_tol);
        }
        let res = self.resolution();
        match self.backend {
            Backend::Curve if res < 3 => bail!("resolution = {res} must be at least 3 points for a curve"),
            Backend::Surface if res > 7 => bail!("resolution = {res} exceeds the icosphere level limit 7"),
            _ => {}
        }
        if let RadialProfile::Ellipsoid { c: Some(_), .. } = self.shape {
            if n == 1 {
                bail!(
                    "shape {} has three semi-axes but the curve backend is planar",
                    self.shape
                );
            }
        }
        self.plaplace.validate().map_err(|e| anyhow::anyhow!("plaplace: {e}"))?;
        Ok(())
    }
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioConfig::from_toml(&text).with_context(|| format!("in {}", path.display()))
}
