use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sleepfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sleepfc")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const QUICK_RUN: &str = r#"
seed = 5
repetitions = 2

[[input.synth]]
duration_s = 300.0
n_events = 15

[classifier]
kind = "gaussian_nb"

[gp]
generations = 4
pop_size = 12
"#;

#[test]
fn synth_writes_three_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleepfc(&["synth", "--out", path(dir.path()), "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["recording.edf", "expert1.txt", "expert2.txt"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let again = tempfile::tempdir().unwrap();
    assert!(sleepfc(&["synth", "--out", path(again.path()), "--seed", "3"]).status.success());
    for f in ["recording.edf", "expert1.txt", "expert2.txt"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(again.path().join(f)).unwrap());
    }

    let csv = dir.path().join("f.csv");
    let edf = dir.path().join("recording.edf");
    let (a1, a2) = (dir.path().join("expert1.txt"), dir.path().join("expert2.txt"));
    let out = sleepfc(&["extract", "--edf", path(&edf), "--annotations", path(&a1), path(&a2), "--out", path(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 901);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 77);

    let out = sleepfc(&[
        "extract", "--edf", path(&edf), "--annotations", path(&a1), path(&a2), "--out", path(&csv), "--channel", "central",
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().next().unwrap().split(',').count(), 27);

    let missing = dir.path().join("missing.txt");
    let out = sleepfc(&["extract", "--edf", path(&edf), "--annotations", path(&a1), path(&missing), "--out", path(&csv)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn synth_capacity_error_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sleepfc(&["synth", "--out", path(dir.path()), "--duration", "10", "--events", "50"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_is_deterministic_and_analyzable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, QUICK_RUN).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = sleepfc(&["run", "--config", path(&cfg), "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("aggregate.json")).unwrap(), fs::read(b.join("aggregate.json")).unwrap());
    assert!(a.join("rep_00.json").exists() && a.join("rep_01.json").exists());

    let o = sleepfc(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("c")), "--seed", "6"]);
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("aggregate.json")).unwrap(), fs::read(dir.path().join("c/aggregate.json")).unwrap());

    let an = dir.path().join("an");
    let o = sleepfc(&["analyze", path(&a), "--out", path(&an)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(an.join("feature_frequency.csv")).unwrap().lines().count(), 76);
}

#[test]
fn baselines_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(&cfg, QUICK_RUN).unwrap();
    let out = dir.path().join("full");
    let o = sleepfc(&["run", "--config", path(&cfg), "--out", path(&out), "--baseline", "full75", "--reps", "1", "--classifier", "knn"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let agg = fs::read_to_string(out.join("aggregate.json")).unwrap();
    assert!(agg.contains("\"method\": \"full75\"") && agg.contains("\"classifier\": \"knn\""));
    assert!(!out.join("rep_01.json").exists());

    let out = dir.path().join("central");
    let o = sleepfc(&["run", "--config", path(&cfg), "--out", path(&out), "--baseline", "central", "--reps", "1"]);
    assert!(o.status.success());
    assert!(fs::read_to_string(out.join("aggregate.json")).unwrap().contains("\"n_attrs\": 25"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "repetitions = 0\n").unwrap();
    assert_eq!(sleepfc(&["run", "--config", path(&bad)]).status.code(), Some(2));
    assert_eq!(sleepfc(&["run", "--config", path(&dir.path().join("none.toml"))]).status.code(), Some(3));
    assert_eq!(sleepfc(&["analyze", path(dir.path())]).status.code(), Some(3));
    assert_eq!(sleepfc(&["run", "--classifier", "svm", "--out", path(dir.path())]).status.code(), Some(2));
}
