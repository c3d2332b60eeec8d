use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const CIRCLE8: &str = r#"{"n":8,"dist":{"points":[[0],[0.7853981633974483],[1.5707963267948966],[2.356194490192345],[3.141592653589793],[3.9269908169872414],[4.71238898038469],[5.497787143782138]],"metric":"circle"},"mass":[1,1,1,1,1,1,1,1],"base":0}"#;
const PATH3: &str = r#"{"n":3,"dist":[[0,1,2],[1,0,1],[2,1,0]],"mass":[1,2,1],"base":0}"#;
const BROKEN: &str = r#"{"n":3,"dist":[[0,1,5],[1,0,1],[5,1,0]],"mass":[1,2,1],"base":0}"#;

fn mmgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmgeo")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", PATH3);
    let bad = write(dir.path(), "bad.json", BROKEN);
    let v = json(&mmgeo(&["validate", "--space", &good]));
    assert_eq!(v["valid"], true);
    let out = mmgeo(&["validate", "--space", &bad]);
    assert!(!out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["valid"], false);
    assert!(v["violations"][0].as_str().unwrap().starts_with("Triangle"));
}

#[test]
fn transport_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", PATH3);
    let v = json(&mmgeo(&["w2", "--space", &p, "--mu", "dirac:0", "--nu", "dirac:2"]));
    assert!((v["w2"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let v = json(&mmgeo(&["wc", "--space", &p, "--mu", "dirac:0", "--nu", "dirac:1"]));
    assert!((v["wc"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let v = json(&mmgeo(&["sinkhorn", "--space", &p, "--mu", "uniform", "--nu", "mass", "--eps", "0.05"]));
    assert_eq!(v["converged"], true);
    assert!(!mmgeo(&["w2", "--space", &p, "--mu", "dirac:7", "--nu", "uniform"]).status.success());
}

#[test]
fn csv_format_for_scalar_and_tabular_results() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", PATH3);
    let out = mmgeo(&["--format", "csv", "w2", "--space", &p, "--mu", "dirac:0", "--nu", "dirac:1"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "w2\n1.0\n");
    let c = write(dir.path(), "c.json", CIRCLE8);
    let out = mmgeo(&["spectrum", "--space", &c, "--k", "3", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "index,eigenvalue,residual");
    assert_eq!(lines.len(), 4);
}

#[test]
fn gromov_commands_bracket_and_agree_on_isomorphic_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.json", CIRCLE8);
    let p = write(dir.path(), "p.json", PATH3);
    let v = json(&mmgeo(&["dpsi", "--a", &c, "--b", &p]));
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap());
    let v = json(&mmgeo(&["pgw", "--a", &c, "--b", &c]));
    assert!(v["bracket"]["upper"].as_f64().unwrap() < 1e-9);
    let v = json(&mmgeo(&["recon", "--a", &c, "--b", &c, "--n-max", "2"]));
    assert_eq!(v["isomorphic"], true);
    assert!(v["first_difference"].is_null());
    let v = json(&mmgeo(&["cyl", "--a", &c, "--b", &p, "--order", "2"]));
    assert!(v["discrepancy"].as_f64().unwrap() > 0.0);
    let v = json(&mmgeo(&["pmgh", "--a", &c, "--b", &p, "--eps-grid", "0.1,10"]));
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap());
    assert_eq!(v["grid"][1]["feasible"], true);
}

#[test]
fn flow_and_heat_commands() {
    let dir = tempfile::tempdir().unwrap();
    let c = write(dir.path(), "c.json", CIRCLE8);
    let v = json(&mmgeo(&["jko", "--space", &c, "--start", "dirac:0", "--tau", "0.05", "--T", "0.2"]));
    let trace = v["trace"].as_array().unwrap();
    assert_eq!(trace.len(), 5);
    let ent: Vec<f64> = trace.iter().map(|r| r["entropy"].as_f64().unwrap()).collect();
    assert!(ent.windows(2).all(|w| w[1] <= w[0] + 1e-12));

    let f = write(dir.path(), "f.json", "[1,0,0,0,0,0,0,0]");
    let a = json(&mmgeo(&["heat", "--space", &c, "--f", &f, "--t", "0.01"]));
    let b = json(&mmgeo(&["heat", "--space", &c, "--f", &f, "--t", "0.01", "--mode", "resolvent", "--k-steps", "64"]));
    let sum = |v: &Value| v["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum::<f64>();
    assert!((sum(&a) - 1.0).abs() < 1e-9);
    for (x, y) in a["values"].as_array().unwrap().iter().zip(b["values"].as_array().unwrap()) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-2);
    }
}

#[test]
fn refinement_diagnostics() {
    let v = json(&mmgeo(&["mosco", "--sizes", "8,16,32"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let gap = |r: &Value| r["energy_gap"].as_f64().unwrap();
    assert!(gap(&rows[1]) < gap(&rows[0]));
    let v = json(&mmgeo(&["eigconv", "--sizes", "16,32", "--k", "3"]));
    let cols = v["eigenvalues"].as_array().unwrap();
    assert_eq!(cols.len(), 2);
}

#[test]
fn suite_writes_artifacts_and_reports_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = mmgeo(&["suite", "--name", "mosco-spectral", "--out", out, "--seed", "3"]);
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("mosco-spectral.csv")).unwrap();
    assert!(csv.starts_with("section,n,param,key,value"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("mosco-spectral.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
}

#[test]
fn thread_cap_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", PATH3);
    let out = Command::new(env!("CARGO_BIN_EXE_mmgeo"))
        .env("MMGEO_THREADS", "1")
        .args(["validate", "--space", &p])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stderr.is_empty());
}
