//! End-to-end runs of the weyl-lab binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_weyl-lab");

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    if let Some(n) = threads {
        cmd.env("WEYL_LAB_THREADS", n);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

const EDS_BALL: &str =
    r#"{"metric":"eds","region":{"shape":{"ball":{"center":[0,0,0],"radius":1}}},"times":{"t0":1,"t1":2,"steps":8}}"#;
const LTB_BOX: &str = r#"{"metric":"ltb","region":{"shape":{"box":{"lo":[1,1.2,0],"hi":[1.5,1.9,0.7]}},"order":3},
    "times":{"t0":0.8,"t1":2.2,"steps":8}}"#;

#[test]
fn catalog_lists_every_metric() {
    let o = run(&["catalog", "--format", "json"], None);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|m| m["name"].as_str().unwrap()).collect();
    for n in ["minkowski", "schwarzschild", "eds", "desitter", "kasner", "ltb", "conformal"] {
        assert!(names.contains(&n), "{n} missing from {names:?}");
    }
}

#[test]
fn eds_scan_has_zero_perfect_fluid_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eds.json", EDS_BALL);
    let o = run(&["scan", "--config", &cfg, "--format", "csv"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("t,S_U,Spf_U,area,vol,bound,quadError,minDtSpf,dtAreaVol,class,error\n"));
    let spf = column(&out, "Spf_U");
    assert_eq!(spf.len(), 8);
    assert!(spf.iter().all(|&v| v == 0.0), "{spf:?}");
}

#[test]
fn ltb_scan_perfect_fluid_entropy_is_nondecreasing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ltb.json", LTB_BOX);
    let o = run(&["scan", "--config", &cfg, "--format", "csv"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let spf = column(&out, "Spf_U");
    let err = column(&out, "quadError");
    for i in 1..spf.len() {
        let slack = err[i] + err[i - 1] + 1e-6;
        assert!(spf[i] >= spf[i - 1] - slack, "Spf_U drops at row {i}: {spf:?}");
    }
}

#[test]
fn entropy_region_writes_header_and_rows_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "eds.json", EDS_BALL);
    let out = dir.path().join("series.csv");
    let o = run(&["entropy-region", "--config", &cfg, "--format", "csv", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("t,S_U,Spf_U,area,vol,bound,quadError\n"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn report_output_is_byte_identical_across_runs_and_thread_counts() {
    let args = ["report", "--metric", "ltb", "--seed", "7", "--format", "csv"];
    let a = run(&args, Some("1"));
    let b = run(&args, Some("4"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let first = stdout(&a);
    assert!(
        first.starts_with("t,x1,x2,x3,class,alphaMax,s,S,Spf,sCrit,gauss,codazzi,normal,hamiltonian,momentum,error\n")
    );
    assert_eq!(first.lines().count(), 21);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"metric":"eds","samples":3,"format":"json","seed":1}"#);
    let from_file = run(&["report", "--config", &cfg], None);
    assert!(serde_json::from_slice::<Value>(&from_file.stdout).is_ok());
    let overridden = run(&["report", "--config", &cfg, "--metric", "kasner", "--format", "csv", "--seed", "2"], None);
    let text = stdout(&overridden);
    assert!(text.starts_with("t,x1"));
    assert_eq!(text.lines().count(), 4);
    let direct = run(&["report", "--metric", "kasner", "--format", "csv", "--seed", "2", "--config", &cfg], None);
    assert_eq!(overridden.stdout, direct.stdout);
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown_key = write_config(dir.path(), "bad.json", r#"{"metric":"eds","colour":"blue"}"#);
    let o = run(&["report", "--config", &unknown_key], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let broken = write_config(dir.path(), "broken.json", "{\"metric\": \"eds\",\n  \"tol\": }");
    let o = run(&["report", "--config", &broken], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    assert_eq!(run(&["report", "--metric", "no-such-metric"], None).status.code(), Some(2));
    assert_eq!(run(&["report", "--config", "/nonexistent/config.json"], None).status.code(), Some(2));
    assert_eq!(run(&["scan", "--metric", "eds"], None).status.code(), Some(2));
    assert_eq!(run(&["report", "--metric", "eds", "--tol", "-1"], None).status.code(), Some(2));
}

#[test]
fn verify_selected_group_passes_with_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.json", r#"{"verify":{"only":["s-crit-table","magnetic"]}}"#);
    let o = run(&["verify", "--config", &cfg, "--format", "json"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], Value::Bool(true));
    let rows = v["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        for key in ["case", "metric", "maxResidual", "tol", "pass", "witnesses"] {
            assert!(r.get(key).is_some(), "missing {key} in {r}");
        }
    }
}

#[test]
fn verify_unknown_group_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "v.json", r#"{"verify":{"only":["nonsense"]}}"#);
    assert_eq!(run(&["verify", "--config", &cfg], None).status.code(), Some(2));
}

#[test]
fn default_verify_suite_passes() {
    let o = run(&["verify", "--format", "csv"], None);
    let text = stdout(&o);
    let failing: Vec<&str> = text.lines().filter(|l| l.contains(",false,")).collect();
    assert_eq!(o.status.code(), Some(0), "failing cases: {failing:?}");
    assert!(text.starts_with("case,metric,maxResidual,tol,pass,witnesses\n"));
}
