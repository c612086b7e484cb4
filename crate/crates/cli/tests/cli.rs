use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ffsense(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ffsense"))
        .args(args)
        .current_dir(dir)
        .env_remove("RAYON_NUM_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let o = ffsense(args, dir);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

const INSTANCE: &[&str] = &["--d", "6", "--k", "2", "--N", "8", "--s", "2", "--m", "4", "--seed", "5"];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn file_pipeline_matches_inline_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["frames", "gen", "--d", "6", "--k", "2", "--N", "8", "--seed", "5", "--out", "c.json"], p);
    ok(&["signal", "gen", "--collection", "c.json", "--s", "2", "--seed", "5", "--out", "x.json"], p);
    ok(&["measure", "sample", "--N", "8", "--m", "4", "--seed", "5", "--out", "a.json"], p);
    ok(
        &["measure", "apply", "--collection", "c.json", "--matrix", "a.json", "--signal", "x.json", "--out", "y.json"],
        p,
    );
    let piped: Value = serde_json::from_str(&ok(
        &["recover", "eq", "--collection", "c.json", "--matrix", "a.json", "--measurements", "y.json"],
        p,
    ))
    .unwrap();
    let inline: Value = serde_json::from_str(&ok(&with(&["recover", "eq"], INSTANCE), p)).unwrap();
    assert_eq!(piped["estimate"], inline["estimate"]);
    assert_eq!(inline["diagnostics"]["status"], "converged");
    assert!(inline["rel_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(inline["certified"], true);

    let truth: Value = serde_json::from_str(&std::fs::read_to_string(p.join("x.json")).unwrap()).unwrap();
    let est = piped["estimate"]["coeffs"].as_array().unwrap();
    for (a, b) in est
        .iter()
        .flat_map(|b| b.as_array().unwrap())
        .zip(truth["coeffs"].as_array().unwrap().iter().flat_map(|b| b.as_array().unwrap()))
    {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-8);
    }
}

#[test]
fn config_file_and_flags_agree_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("st.json"), r#"{"d": 6, "k": 2, "N": 8, "s": 2, "m": 4, "seed": 9}"#).unwrap();
    let from_file = ok(&["recover", "eq", "--config", "st.json", "--seed", "5"], p);
    let inline = ok(&with(&["recover", "eq"], INSTANCE), p);
    assert_eq!(from_file, inline);
}

#[test]
fn csv_and_json_formats() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(&with(&["frames", "coherence", "--format", "csv"], &INSTANCE[..6]), dir.path());
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "N,d,k,lambda,pair_i,pair_j,min_principal_angle,packing_diameter,lambda_floor");
    assert_eq!(lines.count(), 1);
    let json: Value = serde_json::from_str(&ok(&with(&["frames", "coherence"], &INSTANCE[..6]), dir.path())).unwrap();
    let lambda = json["lambda"].as_f64().unwrap();
    assert!(lambda >= json["lambda_floor"].as_f64().unwrap() - 1e-9);

    let signal_csv = ok(&with(&["signal", "gen", "--format", "csv"], INSTANCE), dir.path());
    assert_eq!(signal_csv.lines().next().unwrap(), "block,index,value");
    assert_eq!(signal_csv.lines().count(), 1 + 8 * 2);
}

#[test]
fn exact_rip_dominates_monte_carlo() {
    let dir = tempfile::tempdir().unwrap();
    let exact: Value = serde_json::from_str(&ok(&with(&["rip", "exact"], INSTANCE), dir.path())).unwrap();
    let mc: Value = serde_json::from_str(&ok(&with(&["rip", "mc", "--trials", "50"], INSTANCE), dir.path())).unwrap();
    assert_eq!(exact["supports_evaluated"], 28);
    assert!(mc["value"].as_f64().unwrap() <= exact["value"].as_f64().unwrap() + 1e-12);
}

#[test]
fn bounds_are_labelled_with_their_regime() {
    let dir = tempfile::tempdir().unwrap();
    let json: Value =
        serde_json::from_str(&ok(&["bounds", "eval", "--d", "6", "--k", "2", "--N", "8", "--s", "2"], dir.path()))
            .unwrap();
    assert_eq!(json["necessary_in_regime"], true);
    assert!(json["necessary_regime"].as_str().unwrap().contains("4s"));
    assert_eq!(json["mu_f_sparsity_cap"], Value::Null);
    std::fs::write(dir.path().join("b.json"), r#"{"s": 3, "N": 8, "k": 2, "d": 6, "lambda": 0.5}"#).unwrap();
    let json: Value = serde_json::from_str(&ok(&["bounds", "eval", "--config", "b.json"], dir.path())).unwrap();
    assert_eq!(json["necessary_in_regime"], false);
    assert_eq!(json["parameters"]["lambda"], 0.5);
}

#[test]
fn experiments_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "experiment",
        "phase",
        "--k",
        "2",
        "--N",
        "4",
        "--theta",
        "0,1.2",
        "--s",
        "1,2",
        "--m",
        "1,2",
        "--trials",
        "4",
        "--seed",
        "3",
    ];
    let first = ok(&args, dir.path());
    let again = ok(&args, dir.path());
    assert_eq!(first, again);
    assert_eq!(first.lines().count(), 1 + 2 * 2 * 2);
    assert!(first.starts_with("experiment,family,theta,lambda,d,k,N,s,m,eta,trials,"));

    let one = ffsense(&args, dir.path());
    let many = Command::new(env!("CARGO_BIN_EXE_ffsense")).args(args).env("RAYON_NUM_THREADS", "3").output().unwrap();
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn experiment_config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("noise.json"),
        r#"{"experiment": "noise_robustness", "family": {"type": "random"}, "d": 8, "k": 2, "N": 6,
            "sparsity_grid": [1], "measurement_grid": [4], "trials_per_cell": 3, "eta_grid": [0.0, 0.001],
            "output_path": "noise.csv"}"#,
    )
    .unwrap();
    ok(&["experiment", "noise", "--config", "noise.json"], p);
    let csv = std::fs::read_to_string(p.join("noise.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    ok(&["experiment", "noise", "--config", "noise.json", "--format", "json", "--out", "n.json"], p);
    let json: Value = serde_json::from_str(&std::fs::read_to_string(p.join("n.json")).unwrap()).unwrap();
    assert_eq!(json["fits"].as_array().unwrap().len(), 1);

    let wrong = ffsense(&["experiment", "phase", "--config", "noise.json"], p);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let code = |args: &[&str]| ffsense(args, p).status.code();
    assert_eq!(code(&["frames", "gen", "--d", "6", "--k", "2"]), Some(2));
    assert_eq!(code(&["frames", "gen", "--bogus"]), Some(2));
    assert_eq!(code(&["frames", "gen", "--d", "2", "--k", "3", "--N", "2"]), Some(2));
    assert_eq!(code(&["frames", "gen", "--config", "missing.json"]), Some(3));
    assert_eq!(code(&["recover", "eq", "--collection", "missing.json", "--m", "2"]), Some(3));
    std::fs::write(p.join("bad.json"), r#"{"d": 6, "kk": 2}"#).unwrap();
    let o = ffsense(&["frames", "gen", "--config", "bad.json"], p);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kk"));
    std::fs::write(p.join("blocker"), "").unwrap();
    assert_eq!(code(&["frames", "gen", "--d", "6", "--k", "2", "--N", "3", "--out", "blocker/c.json"]), Some(3));
    let threads = Command::new(env!("CARGO_BIN_EXE_ffsense"))
        .args(["frames", "gen", "--d", "6", "--k", "2", "--N", "3"])
        .env("RAYON_NUM_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    assert_eq!(code(&["frames", "gen", "--d", "6", "--k", "2", "--N", "3"]), Some(0));
}

#[test]
fn noisy_recovery_stays_within_the_noise_level() {
    let dir = tempfile::tempdir().unwrap();
    let json: Value =
        serde_json::from_str(&ok(&with(&["recover", "noisy", "--eta", "0.001"], INSTANCE), dir.path())).unwrap();
    assert_eq!(json["diagnostics"]["status"], "converged");
    assert!(json["rel_error"].as_f64().unwrap() < 0.05);
    let missing = ffsense(&with(&["recover", "noisy"], INSTANCE), dir.path());
    assert_eq!(missing.status.code(), Some(2));
}
