mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use common::fixtures;

fn stepcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stepcast")).args(args).output().expect("binary runs")
}

fn pixel() -> String {
    fixtures().join("devices/pixel.json").display().to_string()
}

fn copy_clean_corpus(to: &Path) {
    for entry in std::fs::read_dir(fixtures().join("clean_corpus/pixel")).unwrap() {
        let path = entry.unwrap().path();
        std::fs::copy(&path, to.join(path.file_name().unwrap())).unwrap();
    }
}

#[test]
fn unreadable_corpus_exits_with_input_error() {
    let out = tempfile::tempdir().unwrap();
    let missing = out.path().join("nope");
    let o = stepcast(&["pipeline", "--corpus", missing.to_str().unwrap(), "--device", &pixel(), "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot read corpus"));
}

#[test]
fn unparsable_instruction_fails_unless_lenient() {
    let corpus = tempfile::tempdir().unwrap();
    copy_clean_corpus(corpus.path());
    std::fs::write(corpus.path().join("zz_noise.txt"), "Thanks for reading, have a nice day.").unwrap();
    let out = tempfile::tempdir().unwrap();
    let base = ["pipeline", "--corpus", corpus.path().to_str().unwrap(), "--device", &pixel(), "--out", out.path().to_str().unwrap()];

    let strict = stepcast(&base);
    assert_eq!(strict.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("zz_noise"));
    assert!(!out.path().join("tutorials").exists());

    let mut args = base.to_vec();
    args.push("--lenient");
    let lenient = stepcast(&args);
    assert!(lenient.status.success(), "{}", String::from_utf8_lossy(&lenient.stderr));
    let bundles = std::fs::read_dir(out.path().join("tutorials")).unwrap().count();
    assert_eq!(bundles, 5);
    let report: Value = serde_json::from_slice(&std::fs::read(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["skipped"].as_array().unwrap().len(), 1);
    assert_eq!(report["skipped"][0]["id"], "zz_noise");
    assert!(String::from_utf8_lossy(&lenient.stdout).contains("5 tutorials: 5 complete, 0 fallback, 1 skipped"));
}

#[test]
fn parse_lists_alternative_readings() {
    let o = stepcast(&["parse", "--corpus", fixtures().join("clean_corpus").to_str().unwrap(), "--beams", "3"]);
    assert!(o.status.success());
    let parsed: Value = serde_json::from_slice(&o.stdout).unwrap();
    let saver = parsed.as_array().unwrap().iter().find(|p| p["id"] == "pixel.data_saver").unwrap();
    let beams = saver["beams"].as_array().unwrap();
    assert!(beams.len() >= 2);
    assert!(beams[0]["score"].as_f64() >= beams[1]["score"].as_f64());
}

#[test]
fn parse_writes_one_file_per_instruction() {
    let out = tempfile::tempdir().unwrap();
    let o = stepcast(&["parse", "--corpus", fixtures().join("clean_corpus").to_str().unwrap(), "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(out.path()).unwrap().count(), 5);
    assert!(out.path().join("pixel.nfc.json").is_file());
}

#[test]
fn clean_corpus_pipeline_and_ablation() {
    let out = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("clean_corpus");
    let args = |cmd: &'static str| {
        vec![cmd.to_string(), "--corpus".into(), corpus.display().to_string(), "--device".into(), pixel(), "--out".into(), out.path().display().to_string(), "--lookahead".into()]
    };
    let o = Command::new(env!("CARGO_BIN_EXE_stepcast")).args(args("pipeline")).output().unwrap();
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(out.path().join("tutorials")).unwrap().count(), 5);
    for id in ["pixel.data_saver", "pixel.nfc"] {
        assert!(out.path().join("tutorials").join(id).join("tutorial.json").is_file());
        assert!(out.path().join("traces").join(format!("{id}.json")).is_file());
    }
    assert!(out.path().join("frames/manifest.json").is_file());

    let o = Command::new(env!("CARGO_BIN_EXE_stepcast")).args(args("ablation")).output().unwrap();
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("Completion Rate") && table.contains("BS+LH"), "{table}");
    assert!(out.path().join("metrics.json").is_file());
}

#[test]
fn zero_beams_is_a_usage_error() {
    let o = stepcast(&["parse", "--corpus", fixtures().join("clean_corpus").to_str().unwrap(), "--beams", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn instructions_without_a_matching_device_fail_strict_runs() {
    let out = tempfile::tempdir().unwrap();
    let tablet = fixtures().join("devices/tablet.json").display().to_string();
    let o = stepcast(&["pipeline", "--corpus", fixtures().join("corpus").to_str().unwrap(), "--device", &pixel(), "--device", &tablet, "--out", out.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no device"));
}
