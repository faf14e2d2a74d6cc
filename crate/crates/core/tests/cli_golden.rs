mod common;

use std::fs;

use common::{align_golden, args, fixture, path, stderr, stdout, toolalign};
use serde_json::Value;
use tempfile::tempdir;

#[test]
fn align_matches_checked_in_golden() {
    let dir = tempdir().unwrap();
    let (schema, mapping) = align_golden(dir.path(), 1);
    assert_eq!(
        fs::read_to_string(schema).unwrap(),
        fs::read_to_string(fixture("golden/aligned_schema.json")).unwrap()
    );
    assert_eq!(
        fs::read_to_string(mapping).unwrap(),
        fs::read_to_string(fixture("golden/mapping.json")).unwrap()
    );
}

#[test]
fn align_twice_is_byte_identical() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    let (sa, ma) = align_golden(a.path(), 1);
    let (sb, mb) = align_golden(b.path(), 4);
    assert_eq!(fs::read(sa).unwrap(), fs::read(sb).unwrap());
    assert_eq!(fs::read(ma).unwrap(), fs::read(mb).unwrap());
}

#[test]
fn align_writes_a_manifest() {
    let dir = tempdir().unwrap();
    align_golden(dir.path(), 1);
    let manifest: Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("mapping.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["config"]["sampler"]["rng_seed"], 7);
    assert_eq!(manifest["config"]["sampler"]["num_candidates"], 32);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
    // 10 components × (32 samples + 1 greedy) plus one re-request per
    // garbage entry that landed in the first 32 draws
    let requests = manifest["sampler_requests"].as_u64().unwrap();
    assert!(requests >= 330, "{requests}");
}

#[test]
fn align_rejects_zero_candidates() {
    let dir = tempdir().unwrap();
    let out = toolalign(args(&[
        "align",
        "--schema",
        &path(&fixture("golden_schema.json")),
        "--fixture",
        &path(&fixture("golden_fixture.json")),
        "--num-candidates",
        "0",
        "--out-schema",
        &path(&dir.path().join("s.json")),
        "--out-mapping",
        &path(&dir.path().join("m.json")),
    ]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("num_candidates"));
    assert!(!dir.path().join("s.json").exists());
}

#[test]
fn align_needs_exactly_one_sampler() {
    let dir = tempdir().unwrap();
    let base = [
        "align",
        "--schema",
        &path(&fixture("golden_schema.json")),
        "--out-schema",
        &path(&dir.path().join("s.json")),
        "--out-mapping",
        &path(&dir.path().join("m.json")),
    ]
    .map(String::from);
    let out = toolalign(&base);
    assert_eq!(out.status.code(), Some(2));
    let mut both = base.to_vec();
    both.extend(args(&[
        "--fixture",
        "f.json",
        "--api-base",
        "http://localhost:1",
    ]));
    assert_eq!(toolalign(&both).status.code(), Some(2));
}

fn align_exit(schema: &str, fixture_name: &str, extra: &[&str]) -> (Option<i32>, String) {
    let dir = tempdir().unwrap();
    let mut a = args(&[
        "align",
        "--schema",
        &path(&fixture(schema)),
        "--fixture",
        &path(&fixture(fixture_name)),
        "--out-schema",
        &path(&dir.path().join("s.json")),
        "--out-mapping",
        &path(&dir.path().join("m.json")),
    ]);
    a.extend(args(extra));
    let out = toolalign(a);
    (out.status.code(), stderr(&out))
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"tools": [{"name": "x"}]}"#).unwrap();
    let out = toolalign(args(&[
        "align",
        "--schema",
        &path(&bad),
        "--fixture",
        &path(&fixture("golden_fixture.json")),
        "--out-schema",
        &path(&dir.path().join("s.json")),
        "--out-mapping",
        &path(&dir.path().join("m.json")),
    ]));
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));

    let (code, err) = align_exit(
        "golden_schema.json",
        "golden_fixture.json",
        &["--num-candidates", "64"],
    );
    assert_eq!(code, Some(4));
    assert!(err.contains("DietTool"), "{err}");

    let (code, err) = align_exit(
        "collision_schema.json",
        "collision_fixture.json",
        &["--num-candidates", "4"],
    );
    assert_eq!(code, Some(5));
    assert!(err.contains("`beta` is already taken"), "{err}");

    let out = toolalign(args(&[
        "align",
        "--schema",
        "/nonexistent.json",
        "--fixture",
        "/nonexistent",
        "--out-schema",
        "a",
        "--out-mapping",
        "b",
    ]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inspect_nutrition_tie() {
    let dir = tempdir().unwrap();
    let mapping = dir.path().join("m.json");
    let out = toolalign(args(&[
        "align",
        "--schema",
        &path(&fixture("nutrition_tie_schema.json")),
        "--fixture",
        &path(&fixture("nutrition_tie_fixture.json")),
        "--out-schema",
        &path(&dir.path().join("s.json")),
        "--out-mapping",
        &path(&mapping),
    ]));
    assert_eq!(out.status.code(), Some(0));
    let out = toolalign(args(&["inspect", &path(&mapping), "DietTool"]));
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("      5     4     11  diet_tracker\n"),
        "{text}"
    );
    assert!(
        text.contains("      4     4     11  diet_insights\n"),
        "{text}"
    );
    assert!(text.contains("l_max 16  tau 3.2"), "{text}");
    assert!(text.contains("selects diet_insights (peakedness=4) rather than the most frequent diet_tracker (5 occurrences)"));
    assert!(text.contains("tie broken by reference: yes  lexicographically: yes"));
}

#[test]
fn inspect_empty_and_unknown() {
    let dir = tempdir().unwrap();
    let (schema, fx, mapping) = (
        dir.path().join("e.json"),
        dir.path().join("f.json"),
        dir.path().join("m.json"),
    );
    fs::write(&schema, r#"{"tools": []}"#).unwrap();
    fs::write(&fx, r#"{"components": {}}"#).unwrap();
    let out = toolalign(args(&[
        "align",
        "--schema",
        &path(&schema),
        "--fixture",
        &path(&fx),
        "--out-schema",
        &path(&dir.path().join("s.json")),
        "--out-mapping",
        &path(&mapping),
    ]));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = toolalign(args(&["inspect", &path(&mapping)]));
    assert!(stdout(&out).starts_with("0 records\n"));

    let out = toolalign(args(&[
        "inspect",
        &path(&fixture("golden/mapping.json")),
        "wthr_fcst.dayz",
    ]));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("unknown component path `wthr_fcst.dayz`"));
    assert!(err.contains("wthr_fcst.days"));
}

#[test]
fn translate_golden_stream() {
    let out = toolalign(args(&[
        "translate",
        "--mapping",
        &path(&fixture("golden/mapping.json")),
        "--input",
        &path(&fixture("calls_aligned.jsonl")),
    ]));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        fs::read_to_string(fixture("golden/calls_original.jsonl")).unwrap()
    );
    assert!(stderr(&out).contains("2 errors"));
}

#[test]
fn translate_fail_fast_stops_with_nonzero_exit() {
    let out = toolalign(args(&[
        "translate",
        "--mapping",
        &path(&fixture("golden/mapping.json")),
        "--input",
        &path(&fixture("calls_aligned.jsonl")),
        "--fail-fast",
    ]));
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stdout(&out).lines().count(), 4);
}

#[test]
fn translate_back_to_aligned_with_repair() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(
        &input,
        "{\"name\": \"get_user_idd\", \"arguments\": {\"user_id\": 42}}\n",
    )
    .unwrap();
    let run = |extra: &[&str]| {
        let mut a = args(&[
            "translate",
            "--mapping",
            &path(&fixture("golden/mapping.json")),
            "--input",
            &path(&input),
            "--direction",
            "original-to-aligned",
        ]);
        a.extend(args(extra));
        toolalign(a)
    };
    let out = run(&["--fail-fast"]);
    assert_eq!(out.status.code(), Some(5));
    let out = run(&["--fuzzy-repair", "1"]);
    assert_eq!(
        stdout(&out),
        "{\"name\":\"get_customer_id\",\"arguments\":{\"customer_id\":42}}\n"
    );
}

#[test]
fn sweep_two_cells() {
    let dir = tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let run = || {
        toolalign(args(&[
            "sweep",
            "--schema",
            &path(&fixture("golden_schema.json")),
            "--fixture",
            &path(&fixture("golden_fixture.json")),
            "--seed",
            "7",
            "--grid-n",
            "16,32",
            "--grid-alpha",
            "0.2",
            "--out-dir",
            &path(&out_dir),
        ]))
    };
    let out = run();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for cell in ["n16_a0.2_t0.4", "n32_a0.2_t0.4"] {
        assert!(out_dir.join(cell).join("mapping.json").exists());
        assert!(out_dir.join(cell).join("aligned_schema.json").exists());
    }
    // the N=32 cell is the golden run
    assert_eq!(
        fs::read(out_dir.join("n32_a0.2_t0.4/mapping.json")).unwrap(),
        fs::read(fixture("golden/mapping.json")).unwrap()
    );
    let first = fs::read(out_dir.join("summary.json")).unwrap();
    let summary: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(summary["cells"].as_array().unwrap().len(), 2);

    // stability by direct comparison of the two mappings
    let names = |cell: &str| -> Vec<String> {
        let m: Value = serde_json::from_str(
            &fs::read_to_string(out_dir.join(cell).join("mapping.json")).unwrap(),
        )
        .unwrap();
        m["records"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["aligned"].as_str().unwrap().to_string())
            .collect()
    };
    let (a, b) = (names("n16_a0.2_t0.4"), names("n32_a0.2_t0.4"));
    let changed = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    assert_eq!(
        summary["unstable_components"].as_array().unwrap().len(),
        changed
    );
    assert_eq!(
        summary["instability"].as_f64().unwrap(),
        changed as f64 / a.len() as f64
    );

    assert_eq!(run().status.code(), Some(0));
    assert_eq!(fs::read(out_dir.join("summary.json")).unwrap(), first);
}

#[test]
fn sweep_empty_grid_is_usage_error() {
    let dir = tempdir().unwrap();
    let out = toolalign(args(&[
        "sweep",
        "--schema",
        &path(&fixture("golden_schema.json")),
        "--fixture",
        &path(&fixture("golden_fixture.json")),
        "--grid-alpha=",
        "--out-dir",
        &path(dir.path()),
    ]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty grid"));
}

#[test]
fn verify_reports_seed_and_passes() {
    let out = toolalign(args(&["verify", "--cases", "200", "--set-cases", "20"]));
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("seed "));
    assert!(text.trim_end().ends_with("all oracles passed"));
}

#[test]
fn verify_is_deterministic_per_seed() {
    let a = toolalign(args(&[
        "verify",
        "--seed",
        "7",
        "--cases",
        "300",
        "--set-cases",
        "10",
    ]));
    let b = toolalign(args(&[
        "verify",
        "--seed",
        "7",
        "--cases",
        "300",
        "--set-cases",
        "10",
    ]));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("seed 7\n"));
}

#[test]
fn verify_catches_injected_fault() {
    let out = toolalign(args(&[
        "verify",
        "--seed",
        "1",
        "--cases",
        "50",
        "--set-cases",
        "5",
        "--inject-fault",
        "off-by-one",
    ]));
    assert_ne!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn eval_on_fixture_tasks() {
    let dir = tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = toolalign(args(&[
        "eval",
        "--schema",
        &path(&fixture("golden_schema.json")),
        "--mapping",
        &path(&fixture("golden/mapping.json")),
        "--tasks",
        &path(&fixture("eval_tasks.json")),
        "--script",
        &path(&fixture("eval_script.json")),
        "--out",
        &path(&report),
    ]));
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(
        text.contains("original       10        6     0.600              5"),
        "{text}"
    );
    assert!(
        text.contains("aligned        10        9     0.900              1"),
        "{text}"
    );
    assert!(dir.path().join("report.manifest.json").exists());
}

#[test]
fn help_lists_commands_but_not_hidden_flags() {
    let out = toolalign(["--help"]);
    assert_eq!(out.status.code(), Some(0));
    for cmd in ["align", "inspect", "translate", "sweep", "verify", "eval"] {
        assert!(stdout(&out).contains(cmd));
    }
    let out = toolalign(["verify", "--help"]);
    assert!(!stdout(&out).contains("inject"));
}
