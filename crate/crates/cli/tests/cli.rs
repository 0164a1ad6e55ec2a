use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn activeval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_activeval")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let o = activeval(args);
    assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

const MANIFEST: &str = r#"
schema_version = 1
name = "cli"
master_seed = 5

[environment]
type = "synthetic"
tie = 0.1
[environment.generator]
type = "geometric"
k = 4
ratio = 2.0

[config]
seeds = 10
max_budget = 400

[[runs]]
algorithm = "Uniform"

[[runs]]
algorithm = "RMED"
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_is_reproducible_and_feeds_complexity() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.toml", MANIFEST);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let table = ok(&["run", "--manifest", &m, "--out", a.to_str().unwrap()]);
    ok(&["run", "--manifest", &m, "--out", b.to_str().unwrap()]);
    assert!(table.starts_with("label,algorithm,"));
    assert_eq!(table.lines().count(), 3);
    for f in ["complexity.csv", "curves.csv", "traces/Uniform.jsonl", "traces/RMED.jsonl"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
    let cx = ok(&["complexity", "--traces", a.join("traces").to_str().unwrap(), "--truth", "3"]);
    assert_eq!(cx.lines().count(), 3);
    assert!(cx.lines().nth(1).unwrap().starts_with("RMED,10,"));
    let curve = ok(&["curve", "--traces", a.join("traces/RMED.jsonl").to_str().unwrap(), "--truth", "3"]);
    assert_eq!(curve.lines().next(), Some("n,accuracy"));
    assert_eq!(curve.lines().count(), 42);
}

#[test]
fn invalid_manifest_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "m.toml", &MANIFEST.replace("seeds = 10", "seeds = 0"));
    let o = activeval(&["run", "--manifest", &m]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("config"), "{err}");
}

#[test]
fn score_then_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = String::new();
    let mut refs = String::new();
    let mut judgments = String::new();
    let words = ["the cat sat on the mat", "a dog ran in the park", "rain falls on the plain", "birds sing at dawn"];
    for (e, r) in words.iter().enumerate() {
        refs.push_str(&format!("{{\"example_id\":\"e{e}\",\"text\":\"{r}\"}}\n"));
        outputs.push_str(&format!("{{\"system_id\":\"good\",\"example_id\":\"e{e}\",\"text\":\"{r}\"}}\n"));
        outputs.push_str(&format!("{{\"system_id\":\"bad\",\"example_id\":\"e{e}\",\"text\":\"zzz qqq\"}}\n"));
        judgments.push_str(&format!("{{\"example_id\":\"e{e}\",\"system_a\":\"good\",\"system_b\":\"bad\",\"outcome\":1.0}}\n"));
    }
    let o = write(dir.path(), "outputs.jsonl", &outputs);
    let r = write(dir.path(), "refs.jsonl", &refs);
    let j = write(dir.path(), "judgments.jsonl", &judgments);
    let scores = dir.path().join("scores.jsonl");
    ok(&["score", "--outputs", &o, "--references", &r, "--metric", "chrf", "--bootstrap", "5", "--out", scores.to_str().unwrap()]);
    let text = fs::read_to_string(&scores).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.contains("\"samples\":["));
    let rec = ok(&["calibrate", "--scores", scores.to_str().unwrap(), "--judgments", &j, "--name", "chrf"]);
    let rec: serde_json::Value = serde_json::from_str(&rec).unwrap();
    assert_eq!(rec["metric"], "chrf");
    assert_eq!(rec["validation_accuracy"], 1.0);
}

#[test]
fn scaling_prints_fit() {
    let out = ok(&[
        "scaling", "--algorithm", "Uniform", "--k", "3,4,5,6", "--ratio", "3", "--tie", "0",
        "--seeds", "8", "--max-budget", "3000",
    ]);
    assert!(out.starts_with("k,complexity\n3,"));
    assert!(out.contains("# preferred "));
}
