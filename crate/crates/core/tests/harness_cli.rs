use std::fs;

use ris_rpm::channel::ScenarioConfig;
use ris_rpm::harness::cli::run_cli;
use ris_rpm::harness::output::read_summary;
use ris_rpm::harness::{load_config, parse_config, run_experiment, write_outputs, ExperimentKind, ExperimentSpec, RunOptions};
use ris_rpm::Error;

fn cli(args: &[&str]) -> i32 {
    run_cli(std::iter::once("ris-rpm").chain(args.iter().copied()))
}

fn small_fig4() -> ExperimentSpec {
    let mut spec = ExperimentSpec::for_kind(ExperimentKind::Fig4OutageVsPt, false);
    spec.trials = 6;
    spec.sweep.values = vec![0.0, 10.0];
    spec.solver.randomization_samples = 10;
    spec
}

#[test]
fn empty_config_is_default_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    fs::write(&path, "").unwrap();
    let spec = load_config(&path).unwrap();
    let cfg = spec.scenario;
    assert_eq!(cfg, ScenarioConfig::default());
    assert_eq!((cfg.n, cfg.l(), cfg.tc, cfg.m), (4, 144, 150, 4));
    assert_eq!((cfg.d0, cfg.dz, cfg.wavelength), (50.0, 2.0, 0.1));
    assert!((cfg.sigma2 - 1e-11).abs() < 1e-24);
    assert!((cfg.pp - 1e-2).abs() < 1e-15);
    assert!((cfg.c0 - 1e-3).abs() < 1e-15);
}

#[test]
fn ungroupable_surface_rejected() {
    let err = parse_config("[scenario]\nl = 145\ng = 4\n").unwrap_err();
    assert!(matches!(err, Error::Config { ref key, .. } if key.starts_with("scenario.")), "{err}");
}

#[test]
fn transmit_power_in_dbm_string() {
    let spec = parse_config("[scenario]\npt = \"20 dBm\"\n").unwrap();
    assert!((spec.scenario.pt - 0.1).abs() < 1e-15);
}

#[test]
fn fig4_csv_schema_and_rerun_identity() {
    let spec = small_fig4();
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&spec, &RunOptions { workers: 1 }).unwrap();
    let (csv_a, json_a) = write_outputs(&a, &dir.path().join("a")).unwrap();
    let b = run_experiment(&spec, &RunOptions { workers: 4 }).unwrap();
    let (csv_b, json_b) = write_outputs(&b, &dir.path().join("b")).unwrap();
    assert_eq!(fs::read(&csv_a).unwrap(), fs::read(&csv_b).unwrap());
    assert_eq!(fs::read(&json_a).unwrap(), fs::read(&json_b).unwrap());

    let text = fs::read_to_string(&csv_a).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(
        &header[..5],
        ["pt_dbm", "outage_rpm_k5", "stderr_rpm_k5", "outage_rpm_k3", "stderr_rpm_k3"]
    );
    assert!(header.contains(&"outage_pbit") && header.contains(&"stderr_pbit"));
    assert_eq!(text.lines().count(), 3);

    let summary = read_summary(&json_a).unwrap();
    assert_eq!(summary.spec, spec);
    let again = run_experiment(&summary.spec, &RunOptions::default()).unwrap();
    assert_eq!(again, a);
}

#[test]
fn cli_reproduce_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cli(&["reproduce", "--fig", "2", "--trials", "20000", "--seed", "7", "--out", out]), 0);
    assert!(dir.path().join("fig2_outage_vs_snr.csv").exists());
    let summary = read_summary(&dir.path().join("fig2_outage_vs_snr.json")).unwrap();
    assert_eq!((summary.spec.seed, summary.spec.trials), (7, 20_000));
}

#[test]
fn cli_worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        r#"
[experiment]
name = "fig5_rate_vs_dy"
trials = 4
noise_samples = 10
schemes = ["rpm_k3@20dBm", "no_it@20dBm"]
[sweep]
values = [40, 50]
[solver]
randomization_samples = 10
"#,
    )
    .unwrap();
    let run = |workers: &str, sub: &str| {
        let out = dir.path().join(sub);
        let code = cli(&["run", "--config", config.to_str().unwrap(), "--workers", workers, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        fs::read(out.join("fig5_rate_vs_dy.csv")).unwrap()
    };
    assert_eq!(run("1", "one"), run("4", "four"));
}

#[test]
fn cli_errors() {
    assert_eq!(cli(&["run", "--config", "/nonexistent/missing.toml"]), 1);
    assert_eq!(cli(&["reproduce", "--fig", "8"]), 2);
    assert_eq!(cli(&["reproduce", "--fig", "3", "--bogus"]), 2);
    assert_eq!(cli(&["frobnicate"]), 2);
    assert_eq!(cli(&[]), 2);
}

#[test]
fn missing_config_reports_path() {
    let err = load_config(std::path::Path::new("missing.toml")).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("missing.toml") && msg.to_lowercase().contains("no such file"), "{msg}");
}

#[test]
fn shipped_example_config_loads() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/outage_vs_pt.toml");
    let spec = load_config(&path).unwrap();
    assert_eq!(spec.name, ExperimentKind::Fig4OutageVsPt);
    assert_eq!(spec.sweep.values, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
    assert_eq!(spec.scenario.g, 6);
    assert!(spec.scenario.kappa_ar.is_infinite());
}
