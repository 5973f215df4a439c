use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn engagenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_engagenet")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    let out = engagenet(args);
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small desk-preset dataset: 3 train, 1 validation and 2 test clips per class.
fn dataset(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let out = engagenet(&[
        "synth-gen", "--counts", "3,3,3,3", "--val-counts", "1,1,1,1", "--test-counts", "2,2,2,2", "--seed", "4",
        "--out", s(&data),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data.join("manifest.csv")
}

#[test]
fn synth_gen_mirrors_the_imbalanced_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&["synth-gen", "--preset", "desk", "--counts", "10,60,600,500", "--seed", "7", "--out", s(&data)]), 0);
    let manifest = std::fs::read_to_string(data.join("manifest.csv")).unwrap();
    let rows: Vec<&str> = manifest.lines().skip(1).collect();
    assert_eq!(rows.len(), 1170);
    for (label, n) in [("0", 10), ("1", 60), ("2", 600), ("3", 500)] {
        assert_eq!(rows.iter().filter(|r| r.split(',').nth(1) == Some(label)).count(), n);
    }
    let first = rows[0].split(',').next().unwrap();
    assert_eq!(&std::fs::read(data.join(first)).unwrap()[..4], b"FSEQ");
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let run = dir.path().join("run");
    let out = engagenet(&[
        "train", "--manifest", s(&manifest), "--out", s(&run), "--epochs", "2", "--deterministic", "--class-weights",
        "--sampler", "stratified", "--batch-size", "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], "epoch,loss,train_acc,seconds");
    assert_eq!(lines.len(), 3);
    assert_eq!(stdout.lines().collect::<Vec<_>>(), lines[1..]);

    let log = std::fs::read_to_string(run.join("access_log.txt")).unwrap();
    assert_eq!(log.lines().count(), 16, "every train and validation clip, once");
    assert!(log.lines().all(|l| !l.contains("test_")), "{log}");

    let ck = run.join("checkpoint.bin");
    let report = dir.path().join("report");
    assert_eq!(code(&["eval", "--checkpoint", s(&ck), "--manifest", s(&manifest), "--split", "test", "--out", s(&report)]), 0);
    let csv = std::fs::read_to_string(report.join("confusion_test.csv")).unwrap();
    let counts: u64 = csv.lines().skip(1).flat_map(|l| l.split(',').skip(1)).map(|v| v.parse::<u64>().unwrap()).sum();
    assert_eq!(counts, 8);
    assert!(std::fs::read_to_string(report.join("confusion_test.txt")).unwrap().contains("recall"));
    assert_eq!(code(&["inspect", s(&ck)]), 0);
    assert_eq!(code(&["inspect", s(&manifest)]), 0);
}

#[test]
fn config_snapshot_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = ["train", "--manifest", s(&manifest), "--out", s(&a), "--epochs", "1", "--seed", "9", "--lr", "0.02", "--head", "meanpool"];
    assert_eq!(code(&first), 0);
    let snapshot = a.join("config.txt");
    assert_eq!(code(&["train", "--config", s(&snapshot), "--manifest", s(&manifest), "--out", s(&b)]), 0);
    assert_eq!(std::fs::read(a.join("checkpoint.bin")).unwrap(), std::fs::read(b.join("checkpoint.bin")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["train", "--bogus"]), 1);
    assert_eq!(code(&["train", "--manifest", "m.csv", "--out", "x", "--class-weights", "all"]), 1);
    assert_eq!(code(&["train", "--manifest", "m.csv", "--out", "x", "--preset", "huge"]), 1);
    assert_eq!(code(&["gradcheck"]), 1);
    assert_eq!(code(&["gradcheck", "--op", "conv3d"]), 1);
    assert_eq!(code(&["train", "--manifest", s(&missing), "--out", s(&dir.path().join("o"))]), 2);

    let junk = dir.path().join("junk.bin");
    std::fs::write(&junk, b"JUNKJUNK").unwrap();
    assert_eq!(code(&["inspect", s(&junk)]), 2);
    assert_eq!(code(&["eval", "--checkpoint", s(&junk), "--manifest", s(&missing)]), 2);

    let out = engagenet(&["gradcheck", "--op", "linear", "--op", "softmax_ce"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("linear") && text.contains("softmax_ce") && text.contains("max_rel_error"), "{text}");

    let manifest = dataset(dir.path());
    let run = dir.path().join("diverge");
    let out = engagenet(&["train", "--manifest", s(&manifest), "--out", s(&run), "--epochs", "2", "--lr", "1e30"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
