use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use seatrack::demo::demo_spec;
use seatrack::format::{session_from_str, truth_from_str, StreamReader};

fn seatrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seatrack")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_analyze_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(&spec, serde_json::to_string_pretty(&demo_spec()).unwrap()).unwrap();
    let (stream, truth, cfg) = (dir.path().join("demo.jsonl"), dir.path().join("truth.json"), dir.path().join("room.cfg"));

    let out = seatrack(&["simulate", "--spec", p(&spec), "--out", p(&stream), "--truth", p(&truth), "--config-out", p(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "wrote 200 frames\n");

    // the stream parses back
    let frames: Vec<_> = StreamReader::new(BufReader::new(File::open(&stream).unwrap())).collect::<Result<_, _>>().unwrap();
    assert_eq!(frames.len(), 200);

    // deterministic regeneration
    let again = dir.path().join("again.jsonl");
    let out = seatrack(&["simulate", "--spec", p(&spec), "--out", p(&again), "--truth", p(&dir.path().join("t2.json"))]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&stream).unwrap(), std::fs::read(&again).unwrap());
    let other = dir.path().join("other.jsonl");
    let out = seatrack(&["simulate", "--spec", p(&spec), "--seed", "5", "--out", p(&other), "--truth", p(&dir.path().join("t3.json"))]);
    assert!(out.status.success());
    assert_ne!(std::fs::read(&stream).unwrap(), std::fs::read(&other).unwrap());

    let session = dir.path().join("demo.session.json");
    let out = seatrack(&["analyze", "--input", p(&stream), "--config", p(&cfg), "--out", p(&session)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("frames 200"), "{summary}");

    // scripted counts come back
    let s = session_from_str(&std::fs::read_to_string(&session).unwrap()).unwrap();
    let t = truth_from_str(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    assert_eq!(s.totals(), t.event_counts());

    // rerun is byte-identical
    let session2 = dir.path().join("rerun.session.json");
    let out = seatrack(&["analyze", "--input", p(&stream), "--config", p(&cfg), "--out", p(&session2)]);
    assert!(out.status.success());
    assert_eq!(std::fs::read(&session).unwrap(), std::fs::read(&session2).unwrap());

    let report = dir.path().join("report.json");
    let out = seatrack(&["evaluate", "--session", p(&session), "--truth", p(&truth), "--json", p(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("precision    100.00%"), "{text}");
    assert!(text.contains("Acc_a 100.00%"), "{text}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["count_error"], serde_json::json!([0, 0, 0, 0, 0]));
    assert_eq!(doc["acc_a"], serde_json::json!(1.0));
}

#[test]
fn missing_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    std::fs::write(&input, "").unwrap();
    let out = seatrack(&["analyze", "--input", p(&input), "--config", p(&dir.path().join("nope.cfg")), "--out", p(&dir.path().join("o.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config not found"));
}

#[test]
fn malformed_stream_fails_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("room.cfg");
    std::fs::write(&cfg, "image_w = 1920\nimage_h = 1080\nrows = 2\ncols = 2\nrect_quad = 400 200 1500 200 1800 1000 100 1000\n").unwrap();
    let input = dir.path().join("in.jsonl");
    std::fs::write(&input, "{\"frame\":0,\"t\":0,\"detections\":[],\"poses\":[]}\nnot json\n").unwrap();
    let out = seatrack(&["analyze", "--input", p(&input), "--config", p(&cfg), "--out", p(&dir.path().join("o.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn invalid_spec_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = demo_spec();
    spec.noise.miss_prob = 2.0;
    let path = dir.path().join("spec.json");
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = seatrack(&["simulate", "--spec", p(&path), "--out", p(&dir.path().join("s.jsonl")), "--truth", p(&dir.path().join("t.json"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("miss_prob"));
}
