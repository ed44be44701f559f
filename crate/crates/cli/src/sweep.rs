//! Parameter sweeps: independent runs plus a combined `sweep.csv`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use imcf_core::verify::isoperimetric_constant;
use rayon::prelude::*;

use crate::config::{Alpha, ScenarioConfig};
use crate::report::{RunReport, RunStatus};
use crate::scenario::run_scenario;

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "IMCF_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    P,
    Resolution,
    Dt,
}

impl FromStr for SweepParam {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "alpha" => SweepParam::Alpha,
            "p" => SweepParam::P,
            "resolution" => SweepParam::Resolution,
            "dt" => SweepParam::Dt,
            _ => bail!("unknown sweep parameter `{s}` (expected alpha, p, resolution or dt)"),
        })
    }
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::P => "p",
            SweepParam::Resolution => "resolution",
            SweepParam::Dt => "dt",
        }
    }

    /// `base` with this parameter set to `value`, validated.
    pub fn apply(self, base: &ScenarioConfig, value: &str) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        let num = || {
            value
                .parse::<f64>()
                .with_context(|| format!("{} value `{value}`", self.name()))
        };
        match self {
            SweepParam::Alpha => cfg.alpha = Alpha::Value(num()?),
            SweepParam::P => cfg.p = vec![num()?],
            SweepParam::Resolution => {
                cfg.resolution = Some(value.parse().with_context(|| format!("resolution value `{value}`"))?)
            }
            SweepParam::Dt => {
                cfg.dt = Some(num()?);
                cfg.cfl = None;
            }
        }
        cfg.output = None;
        cfg.validate().with_context(|| format!("{} = {value}", self.name()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub value: String,
    pub dir: PathBuf,
    pub config: ScenarioConfig,
    pub report: RunReport,
}

/// Worker count from the environment, defaulting to the available cores.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v}"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be at least 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs one scenario per value in `out/<param>_<value>/`, at most `workers`
/// at a time, and writes `out/sweep.csv`.
pub fn sweep(
    base: &ScenarioConfig,
    param: SweepParam,
    values: &[String],
    out: &Path,
    workers: usize,
) -> Result<Vec<SweepRun>> {
    if values.is_empty() {
        bail!("invalid argument: sweep values list is empty");
    }
    let configs = values
        .iter()
        .map(|v| param.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let runs = pool.install(|| {
        values
            .par_iter()
            .zip(configs)
            .map(|(value, config)| {
                let dir = out.join(format!("{}_{value}", param.name()));
                let report = run_scenario(&config, &dir)?;
                Ok(SweepRun {
                    value: value.clone(),
                    dir,
                    config,
                    report,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_table(&out.join("sweep.csv"), param, &runs)?;
    Ok(runs)
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// One row per run: the headline numbers, the α the checks used,
/// `C(n, p, α)` for the first exponent, and every check margin.
fn write_table(path: &Path, param: SweepParam, runs: &[SweepRun]) -> Result<()> {
    let checks: Vec<String> = runs.first().map(|r| r.config.check_names()).unwrap_or_default();
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = [
        param.name(),
        "status",
        "failed",
        "alpha_used",
        "C",
        "lambda1_initial",
        "lambda1_final",
        "mean_radius_final",
        "t_final",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(checks.iter().cloned());
    w.write_record(&header)?;
    for run in runs {
        let s = &run.report.summary;
        let c = s
            .alpha
            .map(|a| isoperimetric_constant(run.config.dim(), run.config.p[0], a));
        let status = match run.report.status {
            RunStatus::Completed => "completed",
            RunStatus::Aborted => "aborted",
        };
        let mut rec = vec![
            run.value.clone(),
            status.to_string(),
            run.report.failures().to_string(),
            opt(s.alpha),
            opt(c),
            opt(s.lambda1_initial),
            opt(s.lambda1_final),
            opt(s.mean_radius_final),
            s.t_final.to_string(),
        ];
        for name in &checks {
            rec.push(run.report.check(name).map_or(String::new(), |c| {
                if c.margin.is_nan() {
                    String::new()
                } else {
                    c.margin.to_string()
                }
            }));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
