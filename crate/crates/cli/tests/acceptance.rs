//! CLI acceptance: determinism of every command across reruns and thread
//! counts (criterion 9), plus the command-level contract (exit codes,
//! file inventories, error messages).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bnsd() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bnsd"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = bnsd().args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str], dir: &Path) -> (i32, String) {
    let out = bnsd().args(args).current_dir(dir).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_fixture(dir: &Path) -> PathBuf {
    // a small dependent dataset: X1 tracks X0, X2 is noise
    let mut csv = String::from("a,b,c\n");
    let mut state = 0x1234_5678_9abc_def0u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as f64 / (1u64 << 31) as f64
    };
    for _ in 0..300 {
        let x0 = next() < 0.6;
        let x1 = next() < if x0 { 0.85 } else { 0.2 };
        let x2 = next() < 0.5;
        csv.push_str(&format!("{},{},{}\n", x0 as u8, x1 as u8, x2 as u8));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

fn write_config(dir: &Path) -> PathBuf {
    let config = r#"
[data]
path = "data.csv"

[mcmc]
iterations = 3000
burn_in = 500
lag = 5
seed = 77

[prior]
gamma = 0.0

[synth]
keep_datasets = 5
release_mode = 5

[[statistics]]
kind = "conditional_mle"
node = 1
parents = [0]
assignment = [0]

[[statistics]]
kind = "chi2_pvalue"
i = 0
j = 1
"#;
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

/// Snapshot of every file under a directory, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(current) = stack.pop() {
        for entry in std::fs::read_dir(&current).unwrap() {
            let entry = entry.unwrap();
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

// criterion 9: rerunning every command with the same seed, under one and
// under four worker threads, produces byte-identical reports.
#[test]
fn criterion_9_determinism_across_threads() {
    let start = std::time::Instant::now();
    let workspace = tempfile::tempdir().unwrap();
    let dir = workspace.path();
    write_fixture(dir);
    write_config(dir);

    let command_sets: Vec<Vec<String>> = vec![
        vec!["fit".into(), "--config".into(), "config.toml".into()],
        vec![
            "synth".into(),
            "--config".into(),
            "config.toml".into(),
            "--chain".into(),
            "OUT/chain.json".into(),
        ],
        vec![
            "synth".into(),
            "--config".into(),
            "config.toml".into(),
            "--chain".into(),
            "OUT/chain.json".into(),
            "--synth.release_mode".into(),
            "3".into(),
        ],
        vec![
            "synth".into(),
            "--config".into(),
            "config.toml".into(),
            "--chain".into(),
            "OUT/chain.json".into(),
            "--synth.release_mode".into(),
            "1".into(),
        ],
        vec!["exact".into(), "--config".into(), "config.toml".into()],
        vec![
            "simulate".into(),
            "--scenario".into(),
            "d3_n500".into(),
            "--replications".into(),
            "3".into(),
            "--mcmc.iterations".into(),
            "2000".into(),
            "--mcmc.burn_in".into(),
            "400".into(),
            "--mcmc.lag".into(),
            "4".into(),
            "--prior.gamma".into(),
            "0".into(),
        ],
        vec![
            "calibrate".into(),
            "--scenario".into(),
            "d3_n500".into(),
            "--grid".into(),
            "0:2:0.5".into(),
            "--replications".into(),
            "2".into(),
        ],
    ];

    let mut reference: Option<BTreeMap<String, Vec<u8>>> = None;
    let mut reference_stdout: Option<Vec<String>> = None;
    for (round, threads) in [(0, "1"), (1, "1"), (2, "4"), (3, "4")] {
        let out_dir = dir.join(format!("run{round}"));
        let mut stdouts = Vec::new();
        for set in &command_sets {
            let args: Vec<String> = set
                .iter()
                .map(|a| a.replace("OUT", &format!("run{round}")))
                .chain([
                    "--output.dir".to_string(),
                    format!("run{round}"),
                    "--threads".to_string(),
                    threads.to_string(),
                ])
                .collect();
            let arg_refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
            let out = run_ok(&arg_refs, dir);
            stdouts.push(
                String::from_utf8_lossy(&out.stdout).replace(&format!("run{round}"), "RUN"),
            );
        }
        // count-dags writes to stdout only
        let out = run_ok(&["count-dags", "--d", "9", "--threads", threads], dir);
        stdouts.push(String::from_utf8_lossy(&out.stdout).into_owned());

        let files: BTreeMap<String, Vec<u8>> = snapshot(&out_dir);
        assert!(files.len() >= 12, "expected a full report set, got {:?}", files.keys());
        match (&reference, &reference_stdout) {
            (None, _) => {
                reference = Some(files);
                reference_stdout = Some(stdouts);
            }
            (Some(reference), Some(ref_stdout)) => {
                assert_eq!(
                    reference.keys().collect::<Vec<_>>(),
                    files.keys().collect::<Vec<_>>(),
                    "file inventory differs on round {round}"
                );
                for (name, bytes) in &files {
                    assert_eq!(
                        bytes,
                        reference.get(name).unwrap(),
                        "file {name} differs on round {round} (threads = {threads})"
                    );
                }
                assert_eq!(&stdouts, ref_stdout, "stdout differs on round {round}");
            }
            _ => unreachable!(),
        }
    }
    println!(
        "criterion 9 (CLI determinism): pass (7 commands x 4 runs, threads 1 and 4, {:?})",
        start.elapsed()
    );
}

#[test]
fn count_dags_prints_table_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_ok(&["count-dags", "--d", "9"], dir.path());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1213442454842881");
    let out = run_ok(&["count-dags", "--d", "1"], dir.path());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1");
    let (code, err) = exit_code(&["count-dags", "--d", "0"], dir.path());
    assert_eq!(code, 2, "{err}");
}

#[test]
fn missing_data_file_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = exit_code(
        &["fit", "--data.path", "absent.csv"],
        dir.path(),
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("absent.csv"), "{err}");
}

#[test]
fn fit_summary_lists_at_most_ten_classes() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    write_config(dir.path());
    run_ok(
        &["fit", "--config", "config.toml", "--output.dir", "out"],
        dir.path(),
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/summary.json")).unwrap())
            .unwrap();
    let classes = summary["top_classes"].as_array().unwrap();
    assert!(classes.len() <= 10);
    let total: f64 = classes
        .iter()
        .map(|c| c["probability"].as_f64().unwrap())
        .sum();
    assert!(total <= 1.0 + 1e-9, "class probabilities sum to {total}");
    assert!(summary["ess_log_posterior"].is_number());
}

#[test]
fn synth_without_retention_fails_for_dataset_modes() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    write_config(dir.path());
    run_ok(
        &["fit", "--config", "config.toml", "--output.dir", "out"],
        dir.path(),
    );
    let (code, err) = exit_code(
        &[
            "synth",
            "--config",
            "config.toml",
            "--chain",
            "out/chain.json",
            "--synth.release_mode",
            "2",
            "--synth.keep_datasets",
            "0",
            "--output.dir",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("keep_datasets"), "{err}");
}

#[test]
fn synth_mode_three_emits_five_datasets_and_mode_one_resamples() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    write_config(dir.path());
    run_ok(
        &["fit", "--config", "config.toml", "--output.dir", "out"],
        dir.path(),
    );
    run_ok(
        &[
            "synth",
            "--config",
            "config.toml",
            "--chain",
            "out/chain.json",
            "--synth.release_mode",
            "3",
            "--output.dir",
            "out",
        ],
        dir.path(),
    );
    for k in 1..=5 {
        assert!(dir.path().join(format!("out/synthetic_000{k}.csv")).exists());
    }
    run_ok(
        &[
            "synth",
            "--config",
            "config.toml",
            "--chain",
            "out/chain.json",
            "--synth.release_mode",
            "1",
            "--output.dir",
            "out",
        ],
        dir.path(),
    );
    let release: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/posterior_g.json")).unwrap(),
    )
    .unwrap();
    let total: f64 = release["frequencies"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_f64().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9);

    // the released empirical posterior feeds back in through resampling
    run_ok(
        &[
            "synth",
            "--config",
            "config.toml",
            "--resample-from",
            "out/posterior_g.json",
            "--resample-draws",
            "200",
            "--synth.release_mode",
            "5",
            "--output.dir",
            "resampled",
        ],
        dir.path(),
    );
    assert!(dir
        .path()
        .join("resampled/statistic_summaries.json")
        .exists());
}

#[test]
fn exact_command_respects_the_enumeration_limit() {
    let dir = tempfile::tempdir().unwrap();
    // d = 6 dataset
    let mut csv = String::from("a,b,c,d,e,f\n");
    for i in 0..20 {
        let bits: Vec<String> = (0..6).map(|j| (((i >> j) & 1) as u8).to_string()).collect();
        csv.push_str(&format!("{}\n", bits.join(",")));
    }
    std::fs::write(dir.path().join("wide.csv"), csv).unwrap();
    let (code, err) = exit_code(
        &["exact", "--data.path", "wide.csv", "--output.dir", "out"],
        dir.path(),
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("MCMC"), "{err}");
}

#[test]
fn exact_gamma_zero_and_default_differ_but_share_support() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    run_ok(
        &[
            "exact",
            "--data.path",
            "data.csv",
            "--prior.gamma",
            "0",
            "--mcmc.max_parents",
            "2",
            "--output.dir",
            "flat",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "exact",
            "--data.path",
            "data.csv",
            "--mcmc.max_parents",
            "2",
            "--output.dir",
            "penalized",
        ],
        dir.path(),
    );
    let load = |name: &str| -> serde_json::Value {
        serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(name).join("exact.json")).unwrap(),
        )
        .unwrap()
    };
    let flat = load("flat");
    let penalized = load("penalized");
    // the uncapped d = 3 space
    assert_eq!(flat["entries"].as_array().unwrap().len(), 25);
    let dags = |v: &serde_json::Value| -> Vec<String> {
        let mut d: Vec<String> = v["entries"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["dag"].as_str().unwrap().to_string())
            .collect();
        d.sort();
        d
    };
    assert_eq!(dags(&flat), dags(&penalized), "support differs");
    assert_ne!(
        flat["entries"], penalized["entries"],
        "gamma had no effect on the posterior"
    );
}

#[test]
fn unknown_scenario_lists_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = exit_code(
        &["simulate", "--scenario", "d12_n9"],
        dir.path(),
    );
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("d3_n500") && err.contains("d7_n5000"), "{err}");
}

/// Minimal structural validator for the shipped schema documents: checks
/// `type` (including union types), `required`, `properties`, `items`, and
/// map-valued objects via `additionalProperties`.
fn validate_schema(value: &serde_json::Value, schema: &serde_json::Value, path: &str) {
    use serde_json::Value;
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().map(|v| v.as_str().unwrap()).collect(),
            _ => panic!("bad schema type at {path}"),
        };
        let actual = match value {
            Value::Null => "null",
            Value::Bool(_) => "boolean",
            Value::Number(n) => {
                if n.is_u64() || n.is_i64() {
                    "integer"
                } else {
                    "number"
                }
            }
            Value::String(_) => "string",
            Value::Array(_) => "array",
            Value::Object(_) => "object",
        };
        // integers satisfy "number"
        let ok = allowed.contains(&actual) || (actual == "integer" && allowed.contains(&"number"));
        assert!(ok, "{path}: got {actual}, schema allows {allowed:?}");
    }
    if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
        let object = value.as_object().unwrap_or_else(|| panic!("{path}: not an object"));
        for key in required {
            let key = key.as_str().unwrap();
            assert!(object.contains_key(key), "{path}: missing required key {key:?}");
        }
    }
    if let (Some(properties), Some(object)) = (
        schema.get("properties").and_then(|p| p.as_object()),
        value.as_object(),
    ) {
        for (key, subschema) in properties {
            if let Some(subvalue) = object.get(key) {
                validate_schema(subvalue, subschema, &format!("{path}.{key}"));
            }
        }
    }
    if let (Some(extra), Some(object)) = (schema.get("additionalProperties"), value.as_object()) {
        if extra.is_object() {
            let described: Vec<&String> = schema
                .get("properties")
                .and_then(|p| p.as_object())
                .map(|p| p.keys().collect())
                .unwrap_or_default();
            for (key, subvalue) in object {
                if !described.contains(&key) {
                    validate_schema(subvalue, extra, &format!("{path}.{key}"));
                }
            }
        }
    }
    if let (Some(items), Some(array)) = (schema.get("items"), value.as_array()) {
        for (i, subvalue) in array.iter().enumerate() {
            validate_schema(subvalue, items, &format!("{path}[{i}]"));
        }
    }
}

// every emitted JSON file validates against its shipped schema document
#[test]
fn emitted_json_matches_the_shipped_schemas() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    write_config(dir.path());
    run_ok(
        &["fit", "--config", "config.toml", "--output.dir", "out"],
        dir.path(),
    );
    for mode in ["1", "3", "4", "5"] {
        run_ok(
            &[
                "synth",
                "--config",
                "config.toml",
                "--chain",
                "out/chain.json",
                "--synth.release_mode",
                mode,
                "--output.dir",
                "out",
            ],
            dir.path(),
        );
    }
    run_ok(
        &["exact", "--config", "config.toml", "--output.dir", "out"],
        dir.path(),
    );
    run_ok(
        &[
            "simulate",
            "--scenario",
            "d3_n500",
            "--replications",
            "2",
            "--mcmc.iterations",
            "1500",
            "--mcmc.burn_in",
            "300",
            "--mcmc.lag",
            "4",
            "--output.dir",
            "out",
        ],
        dir.path(),
    );
    run_ok(
        &[
            "calibrate",
            "--scenario",
            "d3_n500",
            "--grid",
            "0:1:0.5",
            "--replications",
            "1",
            "--output.dir",
            "out",
        ],
        dir.path(),
    );

    let schema_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schema");
    let pairs = [
        ("chain.json", "chain.schema.json"),
        ("summary.json", "summary.schema.json"),
        ("posterior_g.json", "posterior_g.schema.json"),
        ("statistic_samples.json", "statistic_samples.schema.json"),
        ("statistic_summaries.json", "statistic_summaries.schema.json"),
        ("release_manifest.json", "release_manifest.schema.json"),
        ("exact.json", "exact.schema.json"),
        ("scenario_d3_n500.json", "scenario_report.schema.json"),
        ("calibration_d3_n500.json", "calibration.schema.json"),
    ];
    for (artifact, schema_name) in pairs {
        let value: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("out").join(artifact)).unwrap(),
        )
        .unwrap();
        let schema: serde_json::Value = serde_json::from_str(
            &std::fs::read_to_string(schema_dir.join(schema_name)).unwrap(),
        )
        .unwrap();
        validate_schema(&value, &schema, artifact);
    }
}

#[test]
fn calibrate_grid_produces_the_announced_points() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(
        &[
            "calibrate",
            "--scenario",
            "d3_n500",
            "--grid",
            "0:10:0.5",
            "--replications",
            "1",
            "--output.dir",
            "out",
        ],
        dir.path(),
    );
    let result: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/calibration_d3_n500.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(result["grid"].as_array().unwrap().len(), 21);
    assert_eq!(result["probabilities"].as_array().unwrap().len(), 21);
}
