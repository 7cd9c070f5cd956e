use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn aimc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aimc"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn error_kind(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: Value = serde_json::from_str(line.lines().last().unwrap()).expect("json error line");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn gen(dir: &Path) -> String {
    let out = aimc(&[
        "gen", "--n", "150", "--k", "3", "--d", "4", "--view-dims", "6,5", "--noise-sigma", "0.02",
        "--seed", "8", "--out", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("manifest.json").to_string_lossy().into_owned()
}

#[test]
fn gen_then_run_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = gen(&dir.path().join("data"));
    let result = dir.path().join("res.json");
    let out = aimc(&[
        "run", "--data", &manifest, "--method", "aimc", "--k", "3", "--d", "4", "--seed", "1",
        "--out", result.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("acc=1.0000"));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&result).unwrap()).unwrap();
    assert_eq!(doc["assignment"].as_array().unwrap().len(), 150);
    assert!(dir.path().join("res.trace.csv").exists());

    let labels = dir.path().join("data").join("labels.txt");
    let out = aimc(&["eval", "--pred", result.to_str().unwrap(), "--truth", labels.to_str().unwrap()]);
    assert!(out.status.success());
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["acc"], 1.0);
}

#[test]
fn eval_is_invariant_to_renaming_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("t.txt");
    let pred = dir.path().join("p.txt");
    fs::write(&truth, "0\n0\n1\n1\n2\n2\n2\n").unwrap();
    fs::write(&pred, "5\n5\n9\n9\n1\n1\n1\n").unwrap();
    for p in [&truth, &pred] {
        let out = aimc(&["eval", "--pred", p.to_str().unwrap(), "--truth", truth.to_str().unwrap()]);
        assert!(out.status.success());
        let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
        for key in ["acc", "nmi", "purity", "fscore"] {
            assert_eq!(rep[key], 1.0, "{key}");
        }
    }
}

#[test]
fn failures_print_one_json_line_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = aimc(&["run", "--data", "/nonexistent/manifest.json", "--k", "2", "--out", "/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "io");

    let manifest = gen(&dir.path().join("data"));
    let out = aimc(&["run", "--data", &manifest, "--k", "3", "--d", "2", "--out", "/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "config");

    let out = aimc(&["run", "--method", "kmeans"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
}
