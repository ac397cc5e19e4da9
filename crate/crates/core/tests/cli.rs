use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rqp_core::eval::NetPredictor;
use rqp_core::ingest::{load_metadata, read_manifest};
use rqp_core::nn::Checkpoint;

fn rqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqp")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = rqp(args);
    assert!(out.status.success(), "rqp {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let run = dir.path().join("run");
    ok(&["synth", "--out", s(&corpus), "--frames", "24", "--size", "32", "--seed", "5"]);
    let manifest = corpus.join("manifest.txt");
    ok(&["train", "--corpus", s(&manifest), "--epochs", "2", "--out", s(&run)]);
    let checkpoint = run.join("model.json");
    assert!(run.join("history.csv").exists());

    // the fastened model passes through the operational point
    let (frame, sidecar) = read_manifest(&manifest).unwrap().remove(0);
    let anchor = load_metadata(&sidecar).unwrap().anchor;
    let qp0 = anchor.qp0.to_string();
    let predicted: f64 = ok(&["predict", "--checkpoint", s(&checkpoint), "--frame", s(&frame), "--sidecar", s(&sidecar), "--qp", &qp0])
        .trim()
        .parse()
        .unwrap();
    assert!((predicted / anchor.r0 - 1.0).abs() < 1e-12, "{predicted} vs {}", anchor.r0);

    let eval_a = dir.path().join("eval_a");
    let eval_b = dir.path().join("eval_b");
    for out in [&eval_a, &eval_b] {
        ok(&["evaluate", "--checkpoint", s(&checkpoint), "--corpus", s(&manifest), "--out", s(out)]);
    }
    let csv = fs::read(eval_a.join("report.csv")).unwrap();
    assert_eq!(csv, fs::read(eval_b.join("report.csv")).unwrap());
    assert!(String::from_utf8(csv).unwrap().starts_with("model,p0,features,pairs"));

    // reloading and re-saving a checkpoint is bit-exact
    let text = fs::read_to_string(&checkpoint).unwrap();
    let again = NetPredictor::load(&checkpoint).unwrap().to_checkpoint().unwrap().to_json().unwrap();
    assert_eq!(Checkpoint::from_json(&text).unwrap().to_json().unwrap(), again);
    assert_eq!(Checkpoint::from_json(&again).unwrap().params, Checkpoint::from_json(&text).unwrap().params);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = rqp(&["evaluate", "--checkpoint", "/nonexistent/model.json", "--corpus", "/nonexistent/m.txt", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("rqp: error: "), "{stderr}");
    assert_eq!(stderr.lines().count(), 1);
    assert!(!rqp(&["evaluate", "--thresholds", "ten"]).status.success());
}
