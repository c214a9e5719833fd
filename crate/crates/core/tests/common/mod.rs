#![allow(dead_code)]

use std::path::PathBuf;

use serde_json::Value;

pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("vp-critical").chain(args.iter().copied());
    let code = vp_critical::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

pub fn schema_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{name}.schema.json"))
}

/// Panics with every violation if `instance` does not match the schema.
pub fn assert_schema(name: &str, instance: &Value) {
    let text = std::fs::read_to_string(schema_path(name)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect();
    assert!(
        errors.is_empty(),
        "{name} schema violations: {errors:?}\n{instance}"
    );
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
