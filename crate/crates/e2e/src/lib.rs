//! Runs `fsle` commands in-process and returns their JSON reports.

use std::path::{Path, PathBuf};

use serde_json::Value;

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn power_fixture(name: &str) -> PathBuf {
    workspace()
        .join("crates/core/tests/fixtures/power")
        .join(name)
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// Exit code of `fsle <args>`.
pub fn run(args: &[&str]) -> i32 {
    fsle_cli::run(std::iter::once("fsle").chain(args.iter().copied()))
}

/// Runs `fsle <args>` with the report redirected to a temporary file,
/// requires exit code 0 and returns the parsed report. Seed 0 is used
/// unless `args` names one.
pub fn report(args: &[&str]) -> Value {
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("report.json");
    let mut full = args.to_vec();
    if !args.contains(&"--seed") {
        full.extend(["--seed", "0"]);
    }
    full.extend(["--report", p(&path)]);
    let code = run(&full);
    assert_eq!(code, 0, "fsle {args:?} exited {code}");
    let text = std::fs::read_to_string(&path).expect("report written");
    serde_json::from_str(&text).expect("report is JSON")
}
