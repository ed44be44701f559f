use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use imcf_cli::config::resolve_checks;
use imcf_cli::report::render_summary;
use imcf_cli::sweep::{workers_from_env, WORKERS_ENV};
use imcf_cli::{emit_report, parse_config, run_scenario, sweep, verify_run, RunReport, RunStatus, SweepParam};

/// Inverse mean curvature flow simulator and eigenvalue check battery.
#[derive(Parser)]
#[command(name = "imcf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the scenario's `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute checks on a finished run.
    Verify {
        #[arg(long)]
        run: PathBuf,
        /// Comma-separated check names, or `all`.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        checks: Vec<String>,
    },
    /// Run one scenario per parameter value.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// alpha, p, resolution or dt.
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite summary.md from report.json.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn status_line(report: &RunReport) -> String {
    match (&report.status, &report.abort) {
        (RunStatus::Aborted, Some(a)) => format!("aborted at t = {}: {}", a.t, a.cause),
        _ => format!("{} checks, {} failed", report.checks.len(), report.failures()),
    }
}

fn exit_for(report: &RunReport) -> ExitCode {
    if report.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main_inner(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, out } => {
            let cfg = parse_config(&config)?;
            let out = out
                .or_else(|| cfg.output.clone())
                .context("no output directory: pass --out or set `output` in the scenario")?;
            let report = run_scenario(&cfg, &out)?;
            print!("{}", render_summary(&report));
            eprintln!("{}: {}", out.display(), status_line(&report));
            Ok(exit_for(&report))
        }
        Command::Verify { run, checks } => {
            let names = resolve_checks(&checks)?;
            let report = verify_run(&run, &names)?;
            for c in report.checks.iter().filter(|c| names.contains(&c.name)) {
                println!(
                    "{:<24} {:<12} margin {:>11.3e}  tol {:.1e}",
                    c.name, c.status, c.margin, c.tolerance
                );
            }
            Ok(exit_for(&report))
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = parse_config(&config)?;
            let workers = workers_from_env()?;
            let runs = sweep(&cfg, param, &values, &out, workers)?;
            for r in &runs {
                println!("{} = {:<10} {}", param.name(), r.value, status_line(&r.report));
            }
            eprintln!(
                "{} runs ({WORKERS_ENV} = {workers}); table in {}",
                runs.len(),
                out.join("sweep.csv").display()
            );
            Ok(if runs.iter().all(|r| r.report.ok()) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Report { run } => {
            let report = emit_report(&run)?;
            print!("{}", render_summary(&report));
            Ok(exit_for(&report))
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
