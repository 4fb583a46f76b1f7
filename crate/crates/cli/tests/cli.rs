use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tbmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbmc")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = tbmc(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(tbmc(&["--help"]).status.code(), Some(0));
    assert_eq!(tbmc(&["complete", "--bogus"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = dir.path().join("out");
    assert_eq!(tbmc(&["complete", "--input", p(&missing), "--out", p(&out)]).status.code(), Some(2));

    let dup = dir.path().join("dup.csv");
    fs::write(&dup, "row,col,value\n0,0,1\n0,0,0\n").unwrap();
    assert_eq!(tbmc(&["complete", "--input", p(&dup), "--out", p(&out)]).status.code(), Some(2));

    let good = dir.path().join("good.csv");
    fs::write(&good, "row,col,value\n0,0,1\n1,1,1\n").unwrap();
    assert_eq!(tbmc(&["complete", "--input", p(&good), "--out", p(&out), "--tol", "1.5"]).status.code(), Some(1));
    assert_eq!(tbmc(&["ratio", "--tau", "0", "--trials", "1"]).status.code(), Some(1));
}

#[test]
fn synth_then_complete() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bd.csv");
    ok(&["synth", "blockdiag", "--m", "40", "--k", "3", "--a", "0.5", "--seed", "3", "--out", p(&data)]);
    let truth = dir.path().join("bd.csv.truth");
    assert!(truth.join("U.csv").exists() && truth.join("V.csv").exists());

    let out = dir.path().join("fit");
    let stdout = ok(&["complete", "--input", p(&data), "--out", p(&out)]);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["tiles"], 3);
    assert_eq!(report["train_error"], 0);
    let u = fs::read_to_string(out.join("U.csv")).unwrap();
    assert_eq!(u.lines().next(), Some("tile_0,tile_1,tile_2"));
    assert_eq!(u.lines().count(), 41);
    assert_eq!(fs::read_to_string(out.join("report.json")).unwrap().trim(), stdout.trim());
}

#[test]
fn rank1_reports_tile() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m.csv");
    fs::write(&data, "row,col,value\n0,0,1\n0,1,1\n1,0,1\n1,1,0\n").unwrap();
    let json: serde_json::Value = serde_json::from_str(&ok(&["rank1", "--input", p(&data)])).unwrap();
    assert_eq!(json["error"], 1);
}

#[test]
fn seeded_commands_are_byte_identical() {
    let ratio = ["ratio", "--m", "10", "--n", "10", "--tiles", "3", "--trials", "30", "--am", "--seed", "5"];
    let one = ok(&[&ratio[..], &["--jobs", "1"]].concat());
    assert_eq!(one, ok(&[&ratio[..], &["--jobs", "2"]].concat()));
    assert_eq!(one, ok(&[&ratio[..], &["--jobs", "1"]].concat()));

    let phase = ["phase", "--sizes", "48", "--a-grid", "0.5,0.9", "--rho-grid", "0.4,1", "--trials", "3", "--seed", "2"];
    assert_eq!(ok(&[&phase[..], &["--jobs", "1"]].concat()), ok(&[&phase[..], &["--jobs", "3"]].concat()));

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("pl.csv");
    ok(&["synth", "planted", "--m", "30", "--n", "20", "--tiles", "2", "--seed", "1", "--out", p(&data)]);
    let first = fs::read(&data).unwrap();
    ok(&["synth", "planted", "--m", "30", "--n", "20", "--tiles", "2", "--seed", "1", "--out", p(&data)]);
    assert_eq!(first, fs::read(&data).unwrap());

    let eval = ["eval", "--input", p(&data), "--methods", "lp,partition", "--am", "--trials", "4"];
    assert_eq!(ok(&[&eval[..], &["--jobs", "1"]].concat()), ok(&[&eval[..], &["--jobs", "2"]].concat()));
}

#[test]
fn ingest_movielens() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("u.data");
    fs::write(&raw, "7\t30\t5\t881250949\n3\t30\t2\t881250950\n7\t10\t4\t881250951\n").unwrap();
    let out = dir.path().join("ml.csv");
    ok(&["ingest", "movielens", "--input", p(&raw), "--out", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    // users 3,7 -> 0,1; items 10,30 -> 0,1
    assert_eq!(body, vec!["0,1,0", "1,0,1", "1,1,1"]);
}
