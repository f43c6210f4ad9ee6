use std::path::Path;

use assert_cmd::Command;
use randumb::data_io::FeatureFile;

fn write_toy(root: &Path) {
    let dir = root.join("toy");
    std::fs::create_dir_all(&dir).unwrap();
    let make = |n: usize, shift: u64| {
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let c = (i % 3) as u32;
            let jitter = ((i as u64 * 2654435761 + shift) % 1000) as f32 / 1000.0;
            vectors.extend([c as f32 * 4.0 + jitter, 1.0 - jitter, c as f32 - jitter]);
            labels.push(c);
        }
        FeatureFile::new(3, vectors, labels).unwrap()
    };
    make(60, 1).write(&dir.join("train.rdfb")).unwrap();
    make(30, 7).write(&dir.join("test.rdfb")).unwrap();
}

fn randumb() -> Command {
    let mut cmd = Command::cargo_bin("randumb").unwrap();
    cmd.env_remove("RANDUMB_DATA_DIR");
    cmd
}

#[test]
fn run_writes_one_json_line_per_result() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(tmp.path());
    let out = tmp.path().join("runs.jsonl");
    randumb()
        .args(["run", "--dataset", "features:toy", "--embed-dim", "32", "--lambda", "1e-4"])
        .arg("--data-dir")
        .arg(tmp.path())
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(v["config"]["embed_dim"], 32);
    assert_eq!(v["generator"], "chacha20/box-muller");
    assert!(v["average_accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn env_supplies_data_dir_and_config_file_is_overridden() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(tmp.path());
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"dataset": "features:toy", "variant": "ncm", "embed_dim": 3}"#).unwrap();
    let csv = tmp.path().join("t.csv");
    let output = randumb()
        .env("RANDUMB_DATA_DIR", tmp.path())
        .arg("--config")
        .arg(&cfg)
        .args(["ablate", "--embed-dim", "16"])
        .arg("--csv")
        .arg(&csv)
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 5);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.lines().all(|l| l.contains(",16,") || l.starts_with("dataset")));
}

#[test]
fn exit_codes_follow_error_classes() {
    randumb().args(["run", "--dataset", "imagenet21k"]).assert().code(2);
    randumb().args(["run", "--variant", "svm"]).assert().code(2);
    randumb().args(["run", "--embed-dim", "101", "--dataset", "features:toy"]).assert().code(3);
    let tmp = tempfile::tempdir().unwrap();
    write_toy(tmp.path());
    randumb()
        .args(["run", "--dataset", "features:toy", "--embed-dim", "101"])
        .arg("--data-dir")
        .arg(tmp.path())
        .assert()
        .code(2);
    std::fs::write(tmp.path().join("toy/test.rdfb"), b"RDFB\x09").unwrap();
    randumb()
        .args(["run", "--dataset", "features:toy", "--embed-dim", "32"])
        .arg("--data-dir")
        .arg(tmp.path())
        .assert()
        .code(3);
}

#[test]
fn sweep_rejects_descending_dims() {
    let tmp = tempfile::tempdir().unwrap();
    write_toy(tmp.path());
    randumb()
        .args(["sweep", "--dims", "64,32", "--dataset", "features:toy"])
        .arg("--data-dir")
        .arg(tmp.path())
        .assert()
        .code(2);
}

#[test]
fn verify_passes_and_reports_json() {
    let output = randumb().args(["verify", "--seed", "3"]).output().unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    for line in stdout.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["pass"], true, "{line}");
    }
    assert!(stdout.lines().count() >= 10);
}
