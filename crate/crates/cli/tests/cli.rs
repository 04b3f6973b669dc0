use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const GAME: &str = r#"{"r":[[0,0.03]],"sigma":[[0,0.2]],"theta":[[0,0.25]],"T":1,
    "zeta":{"kind":"Constant","zeta0":ZETA},"risk_aversion":2,"rho":RHO,"c":1.2,"state":{"x":1,"z":1}}"#;

fn game(zeta0: f64, rho: f64) -> String {
    GAME.replace("ZETA", &zeta0.to_string())
        .replace("RHO", &rho.to_string())
}

fn write(dir: &TempDir, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn smmv(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smmv"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

/// (object, quantity) → value for the single-valued rows of a report.
fn report(out: &Output) -> HashMap<(String, String), String> {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        r.headers().unwrap(),
        vec!["object", "quantity", "index", "value", "definition"]
    );
    r.records()
        .map(|rec| rec.unwrap())
        .filter(|rec| rec[2].is_empty())
        .map(|rec| ((rec[0].to_string(), rec[1].to_string()), rec[3].to_string()))
        .collect()
}

fn value(r: &HashMap<(String, String), String>, object: &str, quantity: &str) -> f64 {
    r[&(object.to_string(), quantity.to_string())]
        .parse()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn eval_pref_on_ordered_pair() {
    let dir = TempDir::new().unwrap();
    let doc = |z: f64| {
        format!(
            r#"{{"probabilities":[0.25,0.25,0.25,0.25],"variables":{{"f":[1,2,3,4],"g":[1,2,3,5]}},"theta":2,"zeta":{z}}}"#
        )
    };
    let r = report(&smmv(
        &["eval-pref"],
        Some(&write(&dir, "a.json", &doc(0.0))),
    ));
    assert!((value(&r, "f", "lambda") - 2.5).abs() < 1e-12);
    assert!((value(&r, "f", "smmv_value") - value(&r, "g", "smmv_value")).abs() < 1e-12);
    let r = report(&smmv(
        &["eval-pref"],
        Some(&write(&dir, "b.json", &doc(0.2))),
    ));
    assert!((value(&r, "f", "lambda") - 2.4).abs() < 1e-12);
    assert!((value(&r, "g", "lambda") - 2.4).abs() < 1e-12);
    assert!((value(&r, "g", "smmv_value") - value(&r, "f", "smmv_value") - 0.05).abs() < 1e-12);
}

#[test]
fn solve_ct_recovers_mean_variance() {
    let dir = TempDir::new().unwrap();
    let r = report(&smmv(
        &["solve-ct"],
        Some(&write(&dir, "g.json", &game(0.0, 1e-6))),
    ));
    assert_eq!(r[&("market".into(), "consistency".into())], "true");
    let mv = value(&r, "mean_variance", "pi");
    assert!((value(&r, "embedding", "pi") - mv).abs() < 1e-3 * mv.abs());
    assert!(value(&r, "embedding", "residual_first") <= 1e-10);
}

#[test]
fn solve_ct_reports_both_solvers() {
    let dir = TempDir::new().unwrap();
    let r = report(&smmv(
        &["solve-ct"],
        Some(&write(&dir, "g.json", &game(0.2, 0.1))),
    ));
    assert_eq!(r[&("embedding".into(), "regime".into())], "Kinked");
    assert!((value(&r, "embedding", "w") - value(&r, "black_scholes", "w")).abs() < 1e-9);
    assert!(value(&r, "black_scholes", "strike") > 0.0);
}

#[test]
fn solve_static_reports_sign_table() {
    let dir = TempDir::new().unwrap();
    let doc = r#"{"probabilities":[0.2,0.5,0.3],"variables":{"stock":[-0.05,0.1,0.5]},
        "r":0.02,"assets":["stock"],"theta":1,"zeta":0.1}"#;
    let r = report(&smmv(&["solve-static"], Some(&write(&dir, "s.json", doc))));
    assert_eq!(r[&("portfolio".into(), "status".into())], "solved");
    assert_eq!(r[&("sign".into(), "violations".into())], "0");
    assert!(value(&r, "kkt", "stationarity") < 1e-9);
}

#[test]
fn malformed_probabilities_exit_one() {
    let dir = TempDir::new().unwrap();
    let doc = r#"{"probabilities":[0.25,0.25,0.25,0.24],"variables":{"f":[1,2,3,4]},"theta":2}"#;
    let out = smmv(&["eval-pref"], Some(&write(&dir, "bad.json", doc)));
    assert_eq!(out.status.code(), Some(1));
    assert!(out.stdout.is_empty());
    let err = error_json(&out);
    assert_eq!(err["error"], "validation");
    assert!(
        err["message"].as_str().unwrap().contains("sum to 1"),
        "{err}"
    );
}

#[test]
fn usage_errors_exit_one() {
    let out = smmv(&["solve-ct"], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "validation");
    let out = smmv(&["solve-ct", "--steps", "many"], None);
    assert_eq!(out.status.code(), Some(1));
    let out = smmv(&["oracle-check", "--quad-nodes", "1"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unmet_tolerance_exits_two() {
    let dir = TempDir::new().unwrap();
    let out = smmv(
        &["solve-ct", "--tol", "1e-30"],
        Some(&write(&dir, "g.json", &game(0.2, 0.1))),
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "non_convergence");
}

#[test]
fn simulate_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "g.json", &game(0.2, 0.1));
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let args = [
            "simulate",
            "--paths",
            "500",
            "--steps",
            "32",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ];
        assert!(smmv(&args, Some(&cfg)).status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "7");
    assert_eq!(a, run("b.csv", "7"));
    assert_ne!(a, run("c.csv", "8"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("statistic,estimate,std_error,n_paths,seed,definition\n"));
    assert!(text.contains("\nobjective,"));
}

#[test]
fn oracle_check_passes() {
    let dir = TempDir::new().unwrap();
    let out = smmv(
        &["oracle-check", "--paths", "200000"],
        Some(&write(&dir, "g.json", &game(0.2, 0.1))),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = r.records().map(|r| r.unwrap()).collect();
    assert!(rows.len() > 40);
    assert!(rows.iter().all(|r| &r[5] == "true"));
}
