use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qgp_cli::config::{CommandKind, ExperimentConfig};

fn qgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgp"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> String {
    let path = dir.join("config.in.json");
    fs::write(&path, cfg.to_json()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_bo(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::for_command(CommandKind::Bayesopt);
    cfg.out = out.to_str().unwrap().into();
    cfg.bayesopt.n_iter = 4;
    cfg.bayesopt.surrogates = vec!["rbf".into(), "random".into()];
    cfg
}

#[test]
fn unknown_config_key_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"command": "regress", "shotz": 5}"#).unwrap();
    let out = qgp(&["regress", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shotz"));
}

#[test]
fn unknown_surrogate_exits_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = qgp(&[
        "bayesopt",
        "--surrogate",
        "gpucb",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gpucb") && err.contains("qgp-exact"), "{err}");
}

#[test]
fn bad_flags_exit_with_config_error() {
    assert_eq!(qgp(&["regress", "--qubits", "many"]).status.code(), Some(1));
    assert_eq!(qgp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qgp(&["--help"]).status.code(), Some(0));
}

#[test]
fn injected_gram_asymmetry_fails_the_benchmark_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_command(CommandKind::Benchmark);
    cfg.out = dir.path().join("out").to_str().unwrap().into();
    cfg.benchmark.cases = 3;
    cfg.benchmark.matrix_cases = 3;
    cfg.benchmark.ei_samples = 10_000;
    cfg.benchmark.gram_asymmetry = 1e-6;
    let out = qgp(&["benchmark", "--config", &write_config(dir.path(), &cfg)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gram_symmetry"));
    let report = fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    assert!(report.contains("gram_symmetry"));
}

#[test]
fn regress_writes_predictions_metrics_and_config_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let status = qgp(&["regress", "--reps", "2", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for sub in ["", "seed_7", "seed_8"] {
        assert!(
            out.join(sub).join("config.json").is_file(),
            "config echo missing in '{sub}'"
        );
    }
    for sub in ["seed_7", "seed_8"] {
        let csv = fs::read_to_string(out.join(sub).join("predictions.csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,true_f,mean,std"));
        assert_eq!(lines.count(), 50);
        let metrics: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join(sub).join("metrics.json")).unwrap()).unwrap();
        assert!(metrics["exact"]["metrics"]["mse"].as_f64().unwrap() < 0.1);
        assert!(metrics["training"]["loss_history"]
            .as_array()
            .is_some_and(|h| !h.is_empty()));
    }
    let echoed = ExperimentConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(echoed.seed, 7);
    assert_eq!(echoed.repetitions, 2);
}

#[test]
fn single_test_point_gives_single_prediction_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::for_command(CommandKind::Regress);
    cfg.out = dir.path().join("one").to_str().unwrap().into();
    cfg.dataset.n_test = 1;
    cfg.training.budget = 10;
    let out = qgp(&["regress", "--config", &write_config(dir.path(), &cfg)]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("one/predictions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn single_repetition_aggregate_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_bo(&dir.path().join("bo"));
    let out = qgp(&["bayesopt", "--config", &write_config(dir.path(), &cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let agg = fs::read_to_string(dir.path().join("bo/aggregate_rbf.csv")).unwrap();
    let mut lines = agg.lines();
    assert_eq!(lines.next(), Some("iteration,mean,std"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",0")), "{rows:?}");
    for f in [
        "config.json",
        "summary.json",
        "traces/config.json",
        "traces/rbf_run000.csv",
        "traces/random_run000.json",
    ] {
        assert!(dir.path().join("bo").join(f).is_file(), "{f}");
    }
}

#[test]
fn external_command_reproduces_the_builtin_objective() {
    let dir = tempfile::tempdir().unwrap();
    let builtin = small_bo(&dir.path().join("builtin"));
    let builtin_path = dir.path().join("builtin.json");
    fs::write(&builtin_path, builtin.to_json()).unwrap();

    let mut external = small_bo(&dir.path().join("external"));
    external.objective.command = Some(format!("{} eval-objective branin", env!("CARGO_BIN_EXE_qgp")));
    external.objective.bounds = Some(vec![(-5.0, 10.0), (0.0, 15.0)]);
    external.objective.surrogate_noise_var = Some(0.25);
    let external_path = dir.path().join("external.json");
    fs::write(&external_path, external.to_json()).unwrap();

    for p in [&builtin_path, &external_path] {
        let out = qgp(&["bayesopt", "--config", p.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["traces/rbf_run000.csv", "traces/random_run000.csv", "aggregate_rbf.csv"] {
        let a = fs::read_to_string(dir.path().join("builtin").join(f)).unwrap();
        let b = fs::read_to_string(dir.path().join("external").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn eval_objective_speaks_the_line_protocol() {
    use std::io::Write;
    let mut child = Command::new(env!("CARGO_BIN_EXE_qgp"))
        .args(["eval-objective", "branin"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"3.141592653589793 2.275\n0 0\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let values: Vec<f64> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| l.trim().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 2);
    assert!((values[0] - 0.397_887).abs() < 1e-5);
    let t = 1.0 / (8.0 * std::f64::consts::PI);
    assert!((values[1] - (36.0 + 10.0 * (1.0 - t) + 10.0)).abs() < 1e-9);
}
