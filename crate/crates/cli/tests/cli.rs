use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_supermarket"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn theta_reports_json() {
    let out = run(&["theta", "--dist", "exponential:mu=2", "--d", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["theta"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn fixed_point_csv_matches_closed_form() {
    let out = run(&["fixed-point", "--dist", "exponential:mu=2", "--lambda", "1", "--d", "2", "--kmax", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,u_k,log10_u_k,upper_bound"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for (row, expect) in rows.iter().zip([0.5, 0.125, 0.5f64.powi(7)]) {
        assert!((row[1] - expect).abs() < 1e-15, "{row:?}");
    }
}

#[test]
fn mm1_sojourn_is_two() {
    let out = run(&["sojourn", "--dist", "exponential:mu=1", "--d", "1", "--lambda", "0.5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert!((v["sojourn"]["e_td"].as_f64().unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn sojourn_sweep_rows() {
    let out = run(&["sojourn", "--dist", "erlang:m=2,eta=2", "--d", "2", "--lambda-sweep", "0.1:0.5:0.1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("lambda,e_td"));
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn unstable_load_is_a_validation_error() {
    let out = run(&["fixed-point", "--dist", "exponential:mu=1", "--lambda", "1.5", "--d", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: validation:"), "{err}");
}

#[test]
fn bad_arguments_exit_two_on_one_line() {
    for args in [
        vec!["nonsense"],
        vec!["theta", "--dist", "exponential:mu=1"],
        vec!["theta", "--dist", "gamma:k=2", "--d", "2"],
        vec!["sojourn", "--dist", "exponential:mu=1", "--d", "2", "--lambda-sweep", "0.5:0.1:0.1"],
    ] {
        let out = run(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = stderr(&out);
        assert_eq!(err.lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error: validation:"), "{args:?}: {err}");
    }
}

#[test]
fn help_and_version_exit_zero() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}

#[test]
fn ph_method_reports_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("erlang2.ph");
    std::fs::write(&path, "1 0\n-2 2\n0 -2\n").unwrap();
    let out = run(&["ph", "--alpha", path.to_str().unwrap(), "--method", "2", "--lambda", "0.5", "--d", "2", "--kmax", "5"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["fixed_point"]["levels"].as_array().unwrap().len(), 5);
    assert!(v["residuals"]["max_projected"].as_f64().unwrap() < 1e-12);
}

#[test]
fn ode_long_format() {
    let out = run(&[
        "ode", "--system", "exp", "--dist", "exponential:mu=2", "--lambda", "1", "--d", "2", "--kmax", "4",
        "--t-end", "1", "--step", "0.01", "--output-every", "50",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("t,k,u_k"));
    // Three samples (t = 0, 0.5, 1) of levels 0..=4.
    assert_eq!(text.lines().count(), 1 + 3 * 5);
}

#[test]
fn ode_exp_rejects_non_exponential_service() {
    let out = run(&[
        "ode", "--system", "exp", "--dist", "erlang:m=2,eta=2", "--lambda", "0.5", "--d", "2", "--t-end", "1",
        "--step", "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = run(&[
        "simulate", "--n", "50", "--lambda", "0.5", "--d", "2", "--dist", "exponential:mu=1", "--seed", "7", "--reps",
        "2", "--horizon", "500", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = json(&out);
    assert_eq!(summary["command"], "simulate");
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("simulate.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    assert!(csv.starts_with("k,u_k_sim,ci,u_k_model\n"));
    assert_eq!(summary["model"], summary["closest"]);
}

#[test]
fn simulate_is_reproducible_from_seed() {
    let args = [
        "simulate", "--n", "30", "--lambda", "0.6", "--d", "2", "--dist", "exponential:mu=1", "--seed", "11",
        "--horizon", "300", "--summary-only",
    ];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
}

#[test]
fn convergence_fit_decays() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["convergence", "--lambda", "1", "--mu", "2", "--d", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["fit"]["delta"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("convergence.csv").exists());
}

#[test]
fn tables_summary_reports_worst_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["tables", "--which", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["rows"], 8);
    assert!(v["max_rel_error"].as_f64().unwrap() < 0.02);
}

#[test]
fn simulate_model_must_be_a_known_candidate() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "simulate", "--n", "30", "--lambda", "0.5", "--d", "2", "--dist", "exponential:mu=1", "--seed", "3",
        "--horizon", "200", "--out", dir.path().to_str().unwrap(), "--model",
    ];
    let ok = run(&[&base[..], &["classical"]].concat());
    assert!(ok.status.success(), "{}", stderr(&ok));
    assert_eq!(json(&ok)["model"], "classical");
    let bad = run(&[&base[..], &["ph-method-9"]].concat());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn erlang_table_is_table_one() {
    let out = run(&["tables", "--which", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("d,m,printed,"), "{text}");
    assert_eq!(text.lines().count(), 8);
}
