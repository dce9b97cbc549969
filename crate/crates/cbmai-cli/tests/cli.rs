//! End-to-end checks of the command-line surface: exit codes, file formats,
//! and subcommand output shapes.

use std::path::Path;
use std::process::{Command, Output};

fn cbmai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbmai"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn usage_errors_exit_one() {
    let out = cbmai(&["run", "--instance", "E1", "--algo", "nonsense", "--budget", "50"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cbmai(&["definitely-not-a-subcommand"]);
    assert_eq!(out.status.code(), Some(1));
    let out = cbmai(&["sweep", "--instance", "E1", "--budgets", "ten", "--out", "/tmp/x.csv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validation_errors_exit_two() {
    let out = cbmai(&["solve", "NoSuchInstance"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"K\": 2}").unwrap();
    let out = cbmai(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // dimensions inconsistent: r has the wrong length
    let invalid = dir.path().join("invalid.json");
    std::fs::write(
        &invalid,
        r#"{"name":"x","K":2,"K0":2,"L":1,"r":[1.0],"c":[[0.5,0.5]],"c_bar":[1.0],"sigma_r":1.0,"sigma_c":0.5}"#,
    )
    .unwrap();
    let out = cbmai(&["solve", invalid.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn assumption_failure_requires_force() {
    let dir = tempfile::tempdir().unwrap();
    let tie = dir.path().join("tie.json");
    std::fs::write(
        &tie,
        r#"{"name":"tie","K":2,"K0":2,"L":1,"r":[0.8,0.8],"c":[[0.3,0.5]],"c_bar":[1.0],"sigma_r":1.0,"sigma_c":0.5}"#,
    )
    .unwrap();
    let args = [
        "run",
        "--instance",
        tie.to_str().unwrap(),
        "--algo",
        "uslp",
        "--budget",
        "50",
        "--trials",
        "4",
    ];
    let out = cbmai(&args);
    assert_eq!(out.status.code(), Some(2));
    let mut forced: Vec<&str> = args.to_vec();
    forced.push("--force");
    let out = cbmai(&forced);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn solve_reports_optimum_as_json() {
    let out = cbmai(&["solve", "E1"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["status"], "optimal");
    assert_eq!(json["support"], serde_json::json!([0, 1]));
    assert_eq!(json["assumption_ok"], true);

    let out = cbmai(&["solve", "E2"]);
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(json["status"], "infeasible");
}

#[test]
fn instance_materialization_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d1p.json");
    let out = cbmai(&["instance", "D1P", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["K"], 24);
    assert_eq!(json["L"], 2);
    // the file loads back through solve
    let out = cbmai(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let solved: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(solved["support"], serde_json::json!([5, 24, 25]));
}

#[test]
fn generator_spec_files_produce_instances() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("cluster.json");
    std::fs::write(
        &spec,
        r#"{"kind":"hard_cluster","num_arms":16,"cluster_reward":0.7}"#,
    )
    .unwrap();
    let path = dir.path().join("cluster-instance.json");
    let out = cbmai(&[
        "instance",
        spec.to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = cbmai(&["solve", path.to_str().unwrap()]);
    let solved: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(solved["support"], serde_json::json!([0, 1]));
}

#[test]
fn run_emits_csv_row() {
    let out = cbmai(&[
        "run", "--instance", "E1", "--algo", "sfsr-iv", "--budget", "100", "--trials", "16",
        "--seed", "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance,algorithm,budget,trials,errors,error_rate,ci_low,ci_high,base_seed"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("E1,sfsr-iv,100,16,"), "row: {row}");
}

#[test]
fn gaps_and_bounds_emit_json() {
    let out = cbmai(&["gaps", "--instance", "E1"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let d0 = json["delta0_sq"].as_f64().unwrap();
    assert!((d0 - 4.0).abs() < 0.05);

    let out = cbmai(&["bounds", "--instance", "E1"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let lb = json["lower_bound_rate"].as_f64().unwrap();
    assert!((lb - 0.25).abs() < 0.01);
    let uslp = json["uslp_rate"].as_f64().unwrap();
    assert!((uslp - lb / 2.0).abs() < 1e-9);

    // gap estimation is undefined on infeasible instances
    let out = cbmai(&["gaps", "--instance", "E2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_parseable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    let out = cbmai(&[
        "sweep",
        "--instance",
        "E1",
        "--budgets",
        "50,100",
        "--algos",
        "sfsr-iv,uslp",
        "--trials",
        "20",
        "--seed",
        "11",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(Path::new(&path).is_file());
    let text = std::fs::read_to_string(&path).unwrap();
    let rows = cbmai::harness::from_csv(&text).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.trials == 20 && r.base_seed == 11));
}
