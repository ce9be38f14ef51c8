use std::fs;

use evanescent::harness::{self, kernel_distance, ExperimentConfig, ExperimentKind, GridConfig, Suite};
use evanescent::{Error, ModelParams};

const KERNEL_TOML: &str = r#"
kind = "kernel"
t = [1.0]

[params]
lambda = 1.0
c = 1.0
b = 2.0
n = 64
beta = 1.0
a = 1.5

[grid]
u_min = -4.0
u_max = 4.0
u_points = 41
"#;

fn config_path(err: Error) -> String {
    match err {
        Error::Config { path, .. } => path,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ExperimentConfig::from_toml(KERNEL_TOML).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::Kernel);
    assert_eq!(cfg.grid.u_points, 41);
    assert_eq!(cfg.grid.theta_points, GridConfig::default().theta_points);
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn unknown_fields_and_kinds_are_rejected() {
    let extra = format!("{KERNEL_TOML}\nbogus = 1\n");
    assert!(matches!(ExperimentConfig::from_toml(&extra), Err(Error::Config { .. })));
    assert!(ExperimentConfig::from_toml(&KERNEL_TOML.replace("\"kernel\"", "\"nope\"")).is_err());
    assert!("energy-corr".parse::<ExperimentKind>().is_ok());
    assert!("T3".parse::<Suite>().is_err());
}

#[test]
fn validation_names_the_offending_field() {
    let p = ModelParams::new(1.0, 1.0, 0.5, 64, 1.0, 1.75).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::EnergyCorr, p);
    assert_eq!(config_path(cfg.validate().unwrap_err()), "seed");
    cfg.seed = Some(1);
    cfg.validate().unwrap();
    cfg.t = vec![1.0, f64::NAN];
    assert_eq!(config_path(cfg.validate().unwrap_err()), "t[1]");
    cfg.t = vec![1.0];
    cfg.n = vec![64, 0];
    assert_eq!(config_path(cfg.validate().unwrap_err()), "n[1]");
    cfg.n.clear();
    cfg.ring = Some(2);
    assert_eq!(config_path(cfg.validate().unwrap_err()), "ring");
    cfg.ring = None;
    cfg.params.beta = -1.0;
    assert_eq!(config_path(cfg.validate().unwrap_err()), "params.beta");

    let suite = ExperimentConfig::new(ExperimentKind::TheoremSuite, p);
    assert_eq!(config_path(suite.validate().unwrap_err()), "suite");
    let mut kernel = ExperimentConfig::new(ExperimentKind::Kernel, p);
    kernel.t = vec![0.0];
    assert_eq!(config_path(kernel.validate().unwrap_err()), "t");
}

#[test]
fn kernel_run_writes_table_and_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_toml(KERNEL_TOML).unwrap();
    cfg.out = dir.path().to_path_buf();
    let recs = harness::run(&cfg).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].passed, Some(true));
    assert!((recs[0].scalars["mass"] - 1.0).abs() < 1e-6);
    let text = fs::read_to_string(dir.path().join(&recs[0].arrays[0])).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,u,p");
    assert_eq!(lines.len(), 1 + 41 + 1);
    assert!(lines[lines.len() - 1].starts_with("1,mass,"));
    let json: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("records.json")).unwrap()).unwrap();
    assert_eq!(json[0]["kind"], "kernel");
}

#[test]
fn stochastic_output_depends_only_on_seed() {
    let p = ModelParams::new(1.0, 1.0, 0.0, 1, 1.0, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::EnergyCorr, p);
    cfg.seed = Some(9);
    cfg.replicas = 40;
    cfg.ring = Some(32);
    let csv_for = |cfg: &ExperimentConfig| {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg.clone();
        c.out = dir.path().to_path_buf();
        let recs = harness::run(&c).unwrap();
        fs::read(dir.path().join(&recs[0].arrays[0])).unwrap()
    };
    let a = csv_for(&cfg);
    assert_eq!(a, csv_for(&cfg));
    cfg.seed = Some(10);
    assert_ne!(a, csv_for(&cfg));
}

#[test]
fn energy_run_reports_finite_size_gate() {
    let dir = tempfile::tempdir().unwrap();
    let p = ModelParams::new(1.0, 1.0, 0.0, 1, 1.0, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::EnergyCorr, p);
    cfg.seed = Some(1);
    cfg.t = vec![5.0];
    cfg.replicas = 20;
    cfg.ring = Some(8);
    cfg.out = dir.path().to_path_buf();
    let recs = harness::run(&cfg).unwrap();
    assert_eq!(recs[0].passed, Some(false));
    assert!(recs[0].scalars["outer_mass_fraction"] > 0.0);
}

#[test]
fn kernel_distance_is_relative() {
    let n = 4;
    let kernel: Vec<f64> = (0..16).map(|z| if z == 0 { 0.5 } else { 0.0 }).collect();
    let target: Vec<f64> = harness::window_pairs(&kernel, n).map(|(_, s)| s).collect();
    assert_eq!(kernel_distance(&kernel, n, &target), 0.0);
    let doubled: Vec<f64> = target.iter().map(|v| 2.0 * v).collect();
    assert!((kernel_distance(&kernel, n, &doubled) - 0.5).abs() < 1e-15);
}

#[test]
fn suite_respects_a_spent_budget() {
    let r = harness::theorem_suite(Suite::T1, Some(&[64, 128]), Some(0.0)).unwrap();
    assert!(!r.complete);
    assert!(r.entries.len() < 2);
    assert!(!r.checks.iter().find(|c| c.name == "strictly_decreasing").unwrap().passed);
}
