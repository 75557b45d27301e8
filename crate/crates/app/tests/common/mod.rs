#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn ontology_args() -> Vec<String> {
    let mut v = Vec::new();
    for (flag, file) in [("--concepts", "concepts.tsv"), ("--labels", "labels.tsv"), ("--relations", "relations.tsv")] {
        v.push(flag.to_string());
        v.push(fixture(file).display().to_string());
    }
    v
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn bin<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_ontosearch"))
        .args(args)
        .output()
        .expect("binary runs");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

pub fn ok<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> String {
    let out = bin(args);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    out.stdout
}

pub fn p(path: &Path) -> String {
    path.display().to_string()
}

/// triplets -> train (small) -> index with both rankers, under `dir`.
pub fn build_fixture_index(dir: &Path) -> PathBuf {
    let trip = dir.join("trip");
    let mut args = vec!["triplets".to_string()];
    args.extend(ontology_args());
    args.extend(["--seed".into(), "7".into(), "--out".into(), p(&trip)]);
    ok(&args);
    let model = dir.join("model.bin");
    ok(&[
        "train", "--triplets", &p(&trip.join("train.tsv")), "--dev", &p(&trip.join("dev.tsv")),
        "--epochs", "2", "--dim", "32", "--buckets", "4096", "--seed", "7", "--out", &p(&model),
    ]);
    let idx = dir.join("idx");
    let mut args = vec!["index".to_string()];
    args.extend(ontology_args());
    args.extend(["--model".into(), p(&model), "--bm25".into(), "--out".into(), p(&idx)]);
    ok(&args);
    idx
}
