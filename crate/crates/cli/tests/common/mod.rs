#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chronicity"))
}

/// Runs the binary in `dir` and returns its output.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("spawn chronicity")
}

/// Like `run_in` but panics with stderr unless the exit code matches.
pub fn expect(dir: &Path, code: i32, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "chronicity {}\nstderr: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: impl AsRef<Path>) -> serde_json::Value {
    let path = path.as_ref();
    serde_json::from_slice(&fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

/// All files below `root`, as sorted paths relative to it.
pub fn tree(root: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    if root.exists() {
        walk(root, root, &mut out);
    }
    out.sort();
    out
}

pub const SLIDE_SPEC: &str =
    r#"{"width":1400,"height":1100,"n_glomeruli":16,"n_gs":5,"n_fc":2,"p_if":0.3,"p_ta":0.4,"seed":11}"#;

pub const COHORT_SPEC: &str = r#"{
  "n_patients": 300,
  "covariates": [
    {"name": "ci", "distribution": {"kind": "uniform", "low": 0, "high": 12}, "beta": 0.15},
    {"name": "male", "distribution": {"kind": "bernoulli", "p": 0.4}, "beta": 0.0}
  ],
  "baseline_hazard": 0.05,
  "censoring_hazard": 0.05,
  "max_follow_up": 15,
  "seed": 5
}"#;
