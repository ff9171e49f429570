#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_fsle");

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn power_fixture(name: &str) -> PathBuf {
    workspace()
        .join("crates/core/tests/fixtures/power")
        .join(name)
}

/// Runs `fsle` without `FSLE_SEED` in the environment.
pub fn fsle(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("FSLE_SEED")
        .output()
        .expect("spawn fsle")
}

pub fn fsle_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(BIN)
        .args(args)
        .env(key, value)
        .output()
        .expect("spawn fsle")
}

/// Runs, requires exit code 0, checks the report against its schema and
/// returns it.
pub fn report(args: &[&str]) -> Value {
    let out = fsle(args);
    assert!(
        out.status.success(),
        "fsle {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    let value: Value = serde_json::from_slice(&out.stdout).expect("report is JSON");
    validate(&value);
    value
}

pub fn validate(report: &Value) {
    let command = report["command"].as_str().expect("command field");
    let path = workspace().join(format!("docs/schemas/{command}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(report)
        .map(|e| format!("{} at {}", e, e.instance_path))
        .collect();
    assert!(
        errors.is_empty(),
        "{command} report violates schema: {errors:#?}"
    );
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}
