#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn toolalign<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_toolalign"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Aligns the golden schema with seed 7 into `dir`, returning the schema
/// and mapping paths.
pub fn align_golden(dir: &Path, parallelism: usize) -> (PathBuf, PathBuf) {
    let schema = dir.join("aligned_schema.json");
    let mapping = dir.join("mapping.json");
    let out = toolalign(args(&[
        "align",
        "--schema",
        &fixture("golden_schema.json").display().to_string(),
        "--fixture",
        &fixture("golden_fixture.json").display().to_string(),
        "--seed",
        "7",
        "--parallelism",
        &parallelism.to_string(),
        "--out-schema",
        &schema.display().to_string(),
        "--out-mapping",
        &mapping.display().to_string(),
    ]));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    (schema, mapping)
}

pub fn args(a: &[&str]) -> Vec<String> {
    a.iter().map(|s| s.to_string()).collect()
}

pub fn path(p: &Path) -> String {
    p.display().to_string()
}

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use toolalign::schema::ToolSchema;
use toolalign::translation::{Namespace, ToolCall};
use toolalign::AlignmentMapping;

pub fn golden_mapping() -> AlignmentMapping {
    AlignmentMapping::load(&fixture("golden/mapping.json")).unwrap()
}

pub fn golden_schema() -> ToolSchema {
    ToolSchema::parse(&std::fs::read_to_string(fixture("golden_schema.json")).unwrap()).unwrap()
}

pub fn golden_aligned_schema() -> ToolSchema {
    ToolSchema::parse(&std::fs::read_to_string(fixture("golden/aligned_schema.json")).unwrap())
        .unwrap()
}

fn random_value(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..6) {
        0 => json!(rng.random_range(-1000..1000)),
        1 => json!(format!("v{}", rng.random_range(0..100))),
        2 => json!(rng.random_bool(0.5)),
        3 => Value::Null,
        4 => json!([1, "two", {"customer_id": 3}]),
        _ => json!({"user_id": rng.random_range(0..10), "nested": {"days": 1}}),
    }
}

/// Valid calls against `schema`: a random tool, a random subset of its
/// top-level parameters in random order, and arbitrary values.
pub fn generated_calls(
    schema: &ToolSchema,
    namespace: Namespace,
    n: usize,
    seed: u64,
) -> Vec<ToolCall> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tool = &schema.tools()[rng.random_range(0..schema.tools().len())];
            let mut params: Vec<&str> = tool.parameters.iter().map(|p| p.name.as_str()).collect();
            params.shuffle(&mut rng);
            params.truncate(rng.random_range(0..=params.len()));
            let mut args = Map::new();
            for p in params {
                args.insert(p.to_string(), random_value(&mut rng));
            }
            ToolCall::new(tool.name.clone(), args, namespace)
        })
        .collect()
}
