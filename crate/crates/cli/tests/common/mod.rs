#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn data(rel: &str) -> PathBuf {
    repo_root().join("data").join(rel)
}

pub fn sdgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdgm"))
        .args(args)
        .output()
        .expect("spawn sdgm")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn schema(name: &str) -> Value {
    read_json(
        &repo_root()
            .join("schemas")
            .join(format!("{name}.schema.json")),
    )
}

/// Validates `instance` against `schemas/<name>.schema.json`, panicking with
/// every violation.
pub fn assert_schema(name: &str, instance: &Value) {
    let config = schema("config");
    let id = config["$id"].as_str().unwrap().to_string();
    let registry = jsonschema::Registry::new()
        .add(id, config)
        .unwrap()
        .prepare()
        .unwrap();
    let validator = jsonschema::options()
        .with_registry(&registry)
        .build(&schema(name))
        .unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(
        errors.is_empty(),
        "{name} schema violations:\n{}",
        errors.join("\n")
    );
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
