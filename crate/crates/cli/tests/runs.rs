use std::fs;
use std::path::Path;
use std::process::Command;

use imcf_cli::report::{render_summary, RunSummary};
use imcf_cli::sweep::SweepParam;
use imcf_cli::{emit_report, run_scenario, sweep, verify_run, RunReport, RunStatus, ScenarioConfig};
use imcf_core::{CheckReport, CheckStatus};
use tempfile::tempdir;

fn config(text: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml(text).unwrap()
}

const SPHERE: &str = "backend = \"surface\"\nshape = \"sphere(1)\"\nt_end = 1\n";

#[test]
fn sphere_run_passes_every_check() {
    let dir = tempdir().unwrap();
    let report = run_scenario(&config(SPHERE), dir.path()).unwrap();
    assert_eq!(report.status, RunStatus::Completed);
    assert_eq!(report.checks.len(), imcf_cli::CHECKS.len());
    for c in &report.checks {
        assert_eq!(c.status, CheckStatus::Pass, "{c:?}");
    }
    for f in [
        "config.toml",
        "series.csv",
        "series_p2.csv",
        "report.json",
        "summary.md",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert!(dir.path().join("snapshots/snapshot_t0.000000.off").is_file());
    assert!(dir.path().join("snapshots/snapshot_t1.000000.off").is_file());
    assert!(dir.path().join("eigenfunctions/u_p2_t1.000000.csv").is_file());
}

#[test]
fn series_has_fixed_columns_and_increasing_time() {
    let dir = tempdir().unwrap();
    run_scenario(&config(&format!("{SPHERE}sample_interval = 0.25\n")), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,area,H_min,H_max,pinch_margin,eps_t,lambda1,lambda1_p,lambda1_rescaled,decay_bound,rescaled_monotone_q,sphericity"
    );
    let ts: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ts, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
}

#[test]
fn rerun_is_byte_identical() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    let cfg = config(
        "backend = \"surface\"\nshape = \"perturbed_sphere(1,0.05,11)\"\nresolution = 2\nt_end = 0.5\np = [2, 3]\nseed = 4\n",
    );
    run_scenario(&cfg, a.path()).unwrap();
    run_scenario(&cfg, b.path()).unwrap();
    for f in ["series.csv", "series_p3.csv", "report.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn negative_mean_curvature_aborts_with_hypothesis_violation() {
    let dir = tempdir().unwrap();
    let cfg = config("backend = \"surface\"\nshape = \"perturbed_sphere(1,0.6,3)\"\nt_end = 1\n");
    let report = run_scenario(&cfg, dir.path()).unwrap();
    assert_eq!(report.status, RunStatus::Aborted);
    let abort = report.abort.as_ref().unwrap();
    assert_eq!(abort.t, 0.0);
    assert!(abort.cause.contains("hypothesis violation"), "{}", abort.cause);
    let summary = fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(
        summary.contains("aborted") && summary.contains("t = 0") && summary.contains("H > 0"),
        "{summary}"
    );
    // The aborted report is readable again.
    assert_eq!(emit_report(dir.path()).unwrap(), report);
}

#[test]
fn named_checks_appear_once() {
    let dir = tempdir().unwrap();
    let cfg = config(&format!("{SPHERE}checks = [\"h_decay\", \"monotone\", \"monotone\"]\n"));
    let report = run_scenario(&cfg, dir.path()).unwrap();
    let names: Vec<&str> = report.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, vec!["monotone", "h_decay"]);
}

#[test]
fn mcf_marks_flow_specific_checks_inconclusive() {
    let dir = tempdir().unwrap();
    let cfg = config(
        "backend = \"surface\"\nshape = \"sphere(1)\"\nspeed = \"mcf\"\nt_end = 0.05\ndt = 1e-4\nchecks = [\"area_growth\", \"evolution_identity\"]\n",
    );
    let report = run_scenario(&cfg, dir.path()).unwrap();
    assert_eq!(report.check("area_growth").unwrap().status, CheckStatus::Inconclusive);
    assert_eq!(report.check("evolution_identity").unwrap().status, CheckStatus::Pass);
    let summary = fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(summary.contains("| area_growth | inconclusive | n/a |"), "{summary}");
}

#[test]
fn inconclusive_rows_are_not_failures() {
    let report = RunReport {
        status: RunStatus::Completed,
        shape: "sphere(1)".into(),
        abort: None,
        summary: RunSummary::default(),
        checks: vec![
            CheckReport::new("monotone", "λ non-increasing", 0.01, 1e-4),
            CheckReport::inconclusive("evolution_identity", "first variation", 0.05, "cluster split"),
        ],
    };
    assert!(report.ok());
    let text = render_summary(&report);
    assert!(text.contains("| monotone | pass |"));
    assert!(text.contains("| evolution_identity | inconclusive | n/a |"));
    assert!(text.contains("0 of 2 checks failed"));
}

#[test]
fn report_needs_report_json() {
    let dir = tempdir().unwrap();
    let err = emit_report(dir.path()).unwrap_err().to_string();
    assert!(err.contains("report.json"), "{err}");
}

#[test]
fn verify_recomputes_from_artifacts() {
    let dir = tempdir().unwrap();
    let cfg = config(&format!("{SPHERE}sample_interval = 0.1\np = [2, 3]\n"));
    let first = run_scenario(&cfg, dir.path()).unwrap();
    let names = vec!["monotone".to_string(), "pinching_preserved".to_string()];
    let again = verify_run(dir.path(), &names).unwrap();
    assert_eq!(again.checks.len(), first.checks.len());
    for name in &names {
        let (a, b) = (first.check(name).unwrap(), again.check(name).unwrap());
        assert_eq!(a.status, b.status);
        assert!(
            (a.margin - b.margin).abs() < 1e-6,
            "{name}: {} vs {}",
            a.margin,
            b.margin
        );
    }
}

fn column(csv: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    let k = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn alpha_sweep_reports_constant_column() {
    let dir = tempdir().unwrap();
    let cfg = config(
        "backend = \"surface\"\nshape = \"sphere(1)\"\nresolution = 2\nt_end = 0.2\nchecks = [\"epsilon_schedule\"]\n",
    );
    let values: Vec<String> = ["0.25", "0.5", "0.75", "1.0"].iter().map(|s| s.to_string()).collect();
    let runs = sweep(&cfg, SweepParam::Alpha, &values, dir.path(), 2).unwrap();
    assert_eq!(runs.len(), 4);
    let c: Vec<f64> = column(&dir.path().join("sweep.csv"), "C")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let expect = |a: f64| ((2.0 / a) * (0.5 - a / 2.0)).exp();
    for (got, a) in c.iter().zip([0.25, 0.5, 0.75, 1.0]) {
        assert!((got - expect(a)).abs() <= 1e-12 * expect(a), "{a}: {got}");
    }
    assert_eq!(c[3], 1.0);
    assert!((c[1] - std::f64::consts::E).abs() < 1e-15);
    for v in &values {
        assert!(dir.path().join(format!("alpha_{v}/config.toml")).is_file());
    }
}

#[test]
fn dt_sweep_halving_is_first_order() {
    let dir = tempdir().unwrap();
    let cfg = config("backend = \"surface\"\nshape = \"sphere(1)\"\nt_end = 1\nchecks = [\"area_growth\"]\n");
    let values = vec!["0.002".to_string(), "0.001".to_string()];
    sweep(&cfg, SweepParam::Dt, &values, dir.path(), 2).unwrap();
    let r: Vec<f64> = column(&dir.path().join("sweep.csv"), "mean_radius_final")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    let exact = 0.5f64.exp();
    let ratio = (r[0] - exact).abs() / (r[1] - exact).abs();
    assert!(ratio >= 1.9, "{ratio}");
}

#[test]
fn resolution_sweep_refines_sphere_eigenvalue() {
    let dir = tempdir().unwrap();
    let cfg = config("backend = \"surface\"\nshape = \"sphere(1)\"\nt_end = 0.1\nchecks = [\"area_growth\"]\n");
    let values = vec!["2".to_string(), "3".to_string(), "4".to_string()];
    sweep(&cfg, SweepParam::Resolution, &values, dir.path(), 3).unwrap();
    let err: Vec<f64> = column(&dir.path().join("sweep.csv"), "lambda1_initial")
        .iter()
        .map(|s| (s.parse::<f64>().unwrap() - 2.0).abs())
        .collect();
    assert!(err[0] > err[1] && err[1] > err[2], "{err:?}");
}

#[test]
fn empty_sweep_is_rejected() {
    let dir = tempdir().unwrap();
    let err = sweep(&config(SPHERE), SweepParam::P, &[], dir.path(), 1)
        .unwrap_err()
        .to_string();
    assert!(err.contains("empty"), "{err}");
}

#[test]
fn curve_backend_runs() {
    let dir = tempdir().unwrap();
    let cfg = config(
        "backend = \"curve\"\nshape = \"ellipsoid(1.3,1)\"\nresolution = 128\nt_end = 1\nsample_interval = 0.1\np = [2, 3]\n",
    );
    let report = run_scenario(&cfg, dir.path()).unwrap();
    assert_eq!(report.status, RunStatus::Completed);
    for name in [
        "area_growth",
        "monotone",
        "decay_bound",
        "pinching_preserved",
        "isoperimetric_bound",
    ] {
        let c = report.check(name).unwrap();
        assert_eq!(c.status, CheckStatus::Pass, "{c:?}");
    }
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_imcf");
    let dir = tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(
        &good,
        format!("{SPHERE}sample_interval = 0.25\nchecks = [\"area_growth\"]\n"),
    )
    .unwrap();
    let out = dir.path().join("run");
    let st = Command::new(exe)
        .args(["simulate", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let st = Command::new(exe).args(["report", "--run"]).arg(&out).output().unwrap();
    assert!(st.status.success());
    assert!(String::from_utf8_lossy(&st.stdout).contains("| area_growth | pass |"));

    let bad = dir.path().join("bad.toml");
    fs::write(
        &bad,
        "backend = \"surface\"\nshape = \"perturbed_sphere(1,0.6,3)\"\nt_end = 1\n",
    )
    .unwrap();
    let st = Command::new(exe)
        .args(["simulate", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("b"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));

    let st = Command::new(exe)
        .args(["report", "--run"])
        .arg(dir.path().join("missing"))
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));

    let st = Command::new(exe)
        .args(["sweep", "--config"])
        .arg(&good)
        .args(["--param", "alpha", "--values", "0.5,1", "--out"])
        .arg(dir.path().join("sw"))
        .env("IMCF_WORKERS", "2")
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(String::from_utf8_lossy(&st.stderr).contains("IMCF_WORKERS = 2"));
}
