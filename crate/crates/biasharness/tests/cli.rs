//! Binary-level tests: subcommands, exit codes and reproducible outputs.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{findings_for, synthetic_dataset, units_for};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_biasharness"))
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

fn write_fixture_csv(path: &Path, rows: &[(&str, &str)]) {
    let mut writer = csv::Writer::from_path(path).unwrap();
    writer.write_record(["text", "outlet", "topic", "label_bias"]).unwrap();
    for (text, label) in rows {
        writer.write_record([*text, "Outlet", "politics", *label]).unwrap();
    }
    writer.flush().unwrap();
}

#[test]
fn ingest_prints_cleaned_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("data.csv");
    write_fixture_csv(
        &csv_path,
        &[
            ("Sentence one.", "Biased"),
            ("Sentence two.", "Non-biased"),
            ("Sentence three.", "No agreement"),
            ("Sentence four.", "Biased"),
        ],
    );
    let output = bin()
        .args(["ingest", "--dataset"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("3 sentences (2 biased, 1 non-biased)"), "got: {text}");
    assert!(text.contains("removed 1 undecided of 4 loaded"));
}

#[test]
fn ingest_bad_label_exits_with_data_code_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("data.csv");
    write_fixture_csv(
        &csv_path,
        &[("ok", "Biased"), ("bad", "Perhaps"), ("ok", "Biased")],
    );
    let output = bin()
        .args(["ingest", "--dataset"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let err = stderr(&output);
    assert!(err.contains("row 2"), "stderr: {err}");
    assert!(err.contains("Perhaps"));
}

#[test]
fn ingest_missing_dataset_is_config_error() {
    let output = bin().args(["ingest"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn unknown_variant_exits_with_usage_error_listing_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("data.csv");
    write_fixture_csv(&csv_path, &[("a", "Biased"), ("b", "Non-biased")]);
    let output = bin()
        .args(["run", "--variant", "mystery", "--endpoint", "mock:none.json", "--dataset"])
        .arg(&csv_path)
        .args(["--mode", "individual"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let err = stderr(&output);
    assert!(err.contains("mystery"));
    assert!(err.contains("no-definitions"), "stderr: {err}");
}

/// Dataset + keyed mock script on disk for binary runs.
fn scripted_run_fixture(dir: &Path, flagged: &[usize]) -> (std::path::PathBuf, std::path::PathBuf) {
    let dataset = synthetic_dataset(8, &[0, 1, 2, 3], "cli-fixture");
    let csv_path = dir.join("data.csv");
    let rows: Vec<(String, &str)> = dataset
        .sentences
        .iter()
        .map(|s| {
            (
                s.text.clone(),
                if s.gold == biasharness::GoldLabel::Biased {
                    "Biased"
                } else {
                    "Non-biased"
                },
            )
        })
        .collect();
    let row_refs: Vec<(&str, &str)> = rows.iter().map(|(t, l)| (t.as_str(), *l)).collect();
    write_fixture_csv(&csv_path, &row_refs);

    let mode = biasharness::EvaluationMode::Blocks { size: 4 };
    let mut by_content = std::collections::HashMap::new();
    for (ids, text) in units_for(&dataset, &mode) {
        let hit: Vec<usize> = ids.iter().copied().filter(|id| flagged.contains(id)).collect();
        by_content.insert(text, findings_for(&dataset, &hit, 0.8));
    }
    let script = serde_json::json!({"mode": "keyed", "by_content": by_content});
    let script_path = dir.join("script.json");
    std::fs::write(&script_path, serde_json::to_string_pretty(&script).unwrap()).unwrap();
    (csv_path, script_path)
}

#[test]
fn run_produces_expected_metrics_line_and_is_cache_stable() {
    let dir = tempfile::tempdir().unwrap();
    // gold biased: 0..=3; flag 0,1 (TP) and 5 (FP) -> TP=2 FP=1 FN=2 TN=3
    let (csv_path, script_path) = scripted_run_fixture(dir.path(), &[0, 1, 5]);
    let out_dir = dir.path().join("out");
    let cache_dir = dir.path().join("cache");

    let run_once = || {
        bin()
            .args(["run", "--mode", "blocks", "--block-size", "4"])
            .args(["--dataset"])
            .arg(&csv_path)
            .arg("--endpoint")
            .arg(format!("mock:{}", script_path.display()))
            .arg("--out")
            .arg(&out_dir)
            .arg("--cache-dir")
            .arg(&cache_dir)
            .output()
            .unwrap()
    };

    let first = run_once();
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    let text = stdout(&first);
    // P = 2/3 = 0.667, R = 2/4 = 0.500, F1 = 4/7 = 0.571
    assert!(
        text.contains("| base | 2 | 1 | 2 | 3 | 0.571 | 0.500 | 0.667 |"),
        "got: {text}"
    );
    assert!(text.contains("coverage: 100.00% (2 of 2 units)"));
    assert!(out_dir.join("manifest.json").exists());
    assert!(out_dir.join("findings.json").exists());
    assert!(out_dir.join("flagged.json").exists());
    assert!(out_dir.join("units/unit_00000.json").exists());

    // warm cache: the ordered mock would now be exhausted, but the keyed
    // script is never consulted because every unit hits the cache; output
    // is byte-identical
    let second = run_once();
    assert!(second.status.success());
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn run_warm_cache_makes_zero_backend_calls() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synthetic_dataset(4, &[0, 1], "cli-ordered");
    let csv_path = dir.path().join("data.csv");
    let rows: Vec<(String, &str)> = dataset
        .sentences
        .iter()
        .map(|s| {
            (
                s.text.clone(),
                if s.gold == biasharness::GoldLabel::Biased { "Biased" } else { "Non-biased" },
            )
        })
        .collect();
    let refs: Vec<(&str, &str)> = rows.iter().map(|(t, l)| (t.as_str(), *l)).collect();
    write_fixture_csv(&csv_path, &refs);

    // an ordered script with exactly one response per unit: a second pass
    // over the backend would exhaust it and fail the run
    let mode = biasharness::EvaluationMode::Blocks { size: 2 };
    let responses: Vec<String> = units_for(&dataset, &mode)
        .iter()
        .map(|(ids, _)| {
            let hit: Vec<usize> = ids.iter().copied().filter(|id| *id == 0).collect();
            findings_for(&dataset, &hit, 0.9)
        })
        .collect();
    let script = serde_json::json!({"mode": "ordered", "responses": responses});
    let script_path = dir.path().join("ordered.json");
    std::fs::write(&script_path, script.to_string()).unwrap();

    let run_once = || {
        bin()
            .args(["run", "--mode", "blocks", "--block-size", "2", "--concurrency", "1"])
            .args(["--dataset"])
            .arg(&csv_path)
            .arg("--endpoint")
            .arg(format!("mock:{}", script_path.display()))
            .arg("--out")
            .arg(dir.path().join("out"))
            .arg("--cache-dir")
            .arg(dir.path().join("cache"))
            .output()
            .unwrap()
    };
    let first = run_once();
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    // succeeds again only if every unit comes from the cache
    let second = run_once();
    assert!(second.status.success(), "stderr: {}", stderr(&second));
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn ablate_renders_one_row_per_variant_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, script_path) = scripted_run_fixture(dir.path(), &[0, 1]);
    let out_dir = dir.path().join("out");
    let output = bin()
        .args(["ablate", "--variants", "base,no-example,threshold-0.6"])
        .args(["--mode", "blocks", "--block-size", "4", "--dataset"])
        .arg(&csv_path)
        .arg("--endpoint")
        .arg(format!("mock:{}", script_path.display()))
        .arg("--out")
        .arg(&out_dir)
        .arg("--cache-dir")
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    let base_pos = text.find("| base |").expect("base row");
    let noex_pos = text.find("| no-example |").expect("no-example row");
    let threshold_pos = text.find("| threshold-0.6 |").expect("threshold row");
    assert!(base_pos < noex_pos && noex_pos < threshold_pos);
    assert!(out_dir.join("ablation.json").exists());
    assert!(out_dir.join("base/manifest.json").exists());
    assert!(out_dir.join("no-example/manifest.json").exists());
}

#[test]
fn export_finetune_writes_jsonl_and_remainder() {
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, _) = scripted_run_fixture(dir.path(), &[]);
    // oracle entries for the biased ids 0..=3
    let oracle: serde_json::Value = serde_json::json!({
        "0": {"bias_type": "political bias", "bias_score": 0.8, "description": "slant"},
        "1": {"bias_type": "linguistic bias", "description": "loaded words"},
        "2": {"bias_type": "political bias", "bias_score": 0.7, "description": "slant"},
        "3": {"bias_type": "gender bias", "description": "stereotype"},
    });
    let oracle_path = dir.path().join("oracle.json");
    std::fs::write(&oracle_path, oracle.to_string()).unwrap();
    let out_dir = dir.path().join("out");

    let output = bin()
        .args(["export-finetune", "--n", "1", "--oracle"])
        .arg(&oracle_path)
        .args(["--mode", "blocks", "--block-size", "4", "--dataset"])
        .arg(&csv_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr(&output));
    let jsonl = std::fs::read_to_string(out_dir.join("finetune.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 1);
    let remaining = std::fs::read_to_string(out_dir.join("remaining.csv")).unwrap();
    assert_eq!(remaining.lines().count(), 5); // header + 4 sentences
    assert!(out_dir.join("finetune_manifest.json").exists());
}

#[test]
fn export_finetune_missing_oracle_lists_ids() {
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, _) = scripted_run_fixture(dir.path(), &[]);
    let oracle_path = dir.path().join("oracle.json");
    std::fs::write(&oracle_path, "{}").unwrap();

    let output = bin()
        .args(["export-finetune", "--n", "2", "--oracle"])
        .arg(&oracle_path)
        .args(["--mode", "blocks", "--block-size", "4", "--dataset"])
        .arg(&csv_path)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    let err = stderr(&output);
    assert!(err.contains("oracle findings missing"), "stderr: {err}");
}

#[test]
fn report_round_trips_between_formats() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![
        biasharness::ReportRow::new("GPT-3.5", biasharness::ConfusionMatrix::new(965, 460, 53, 72)),
        biasharness::ReportRow::new("GPT-4", biasharness::ConfusionMatrix::new(739, 138, 279, 394)),
    ];
    let json_path = dir.path().join("rows.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&rows).unwrap()).unwrap();

    let as_csv = bin()
        .args(["report", "--format", "csv", "--input"])
        .arg(&json_path)
        .output()
        .unwrap();
    assert!(as_csv.status.success(), "stderr: {}", stderr(&as_csv));
    let csv_text = stdout(&as_csv);
    let csv_path = dir.path().join("rows.csv");
    std::fs::write(&csv_path, &csv_text).unwrap();

    let as_markdown = bin()
        .args(["report", "--format", "markdown", "--input"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(as_markdown.status.success());
    let md = stdout(&as_markdown);
    assert!(md.contains("| GPT-3.5 | 965 | 460 | 53 | 72 | 0.790 | 0.948 | 0.677 |"), "got: {md}");

    // CSV -> CSV is a fixpoint
    let csv_again = bin()
        .args(["report", "--format", "csv", "--input"])
        .arg(&csv_path)
        .output()
        .unwrap();
    assert_eq!(stdout(&csv_again), csv_text);
}

#[test]
fn subtype_eval_emits_seeded_sheet_then_scores_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let (csv_path, script_path) = scripted_run_fixture(dir.path(), &[0, 1, 2, 5]);
    let run_dir = dir.path().join("run");
    let status = bin()
        .args(["run", "--mode", "blocks", "--block-size", "4", "--dataset"])
        .arg(&csv_path)
        .arg("--endpoint")
        .arg(format!("mock:{}", script_path.display()))
        .arg("--out")
        .arg(&run_dir)
        .arg("--cache-dir")
        .arg(dir.path().join("cache"))
        .status()
        .unwrap();
    assert!(status.success());

    let out_dir = dir.path().join("eval");
    let sample = |seed: &str| {
        let output = bin()
            .args(["subtype-eval", "--sample", "3", "--seed", seed, "--run-dir"])
            .arg(&run_dir)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(output.status.success(), "stderr: {}", stderr(&output));
        std::fs::read_to_string(out_dir.join("sample_sheet.csv")).unwrap()
    };
    let first = sample("11");
    let second = sample("11");
    assert_eq!(first, second, "same seed must reproduce the sample");
    assert!(first.lines().count() == 4); // header + 3 samples
    assert!(first.starts_with("sample_id,category,sentence_id,sentence,description,judge1,judge2,judge3"));
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out_dir.join("sample_manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["sample"], 3);

    // oversampling is an error
    let too_many = bin()
        .args(["subtype-eval", "--sample", "50", "--run-dir"])
        .arg(&run_dir)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(too_many.status.code(), Some(3));

    // fill the sheet: first sample right by majority, others wrong
    let mut filled = String::from("sample_id,category,judge1,judge2,judge3\n");
    for (i, line) in first.lines().skip(1).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let verdicts = if i == 0 {
            "right,right,wrong"
        } else {
            "wrong,wrong,right"
        };
        filled.push_str(&format!("{},{},{verdicts}\n", fields[0], fields[1]));
    }
    let judgments_path = dir.path().join("judgments.csv");
    std::fs::write(&judgments_path, filled).unwrap();

    let scored = bin()
        .args(["subtype-eval", "--run-dir"])
        .arg(&run_dir)
        .args(["--judgments"])
        .arg(&judgments_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(scored.status.success(), "stderr: {}", stderr(&scored));
    let table = stdout(&scored);
    assert!(table.contains("| political bias | 1 | 2 | 3 | 33.33% |"), "got: {table}");
    assert!(table.contains("| total (all classes) | 1 | 2 | 3 | 33.33% |"));
}

#[test]
fn partial_coverage_exits_with_code_five() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = synthetic_dataset(4, &[0, 1], "cli-partial");
    let csv_path = dir.path().join("data.csv");
    let rows: Vec<(String, &str)> = dataset
        .sentences
        .iter()
        .map(|s| {
            (
                s.text.clone(),
                if s.gold == biasharness::GoldLabel::Biased { "Biased" } else { "Non-biased" },
            )
        })
        .collect();
    let refs: Vec<(&str, &str)> = rows.iter().map(|(t, l)| (t.as_str(), *l)).collect();
    write_fixture_csv(&csv_path, &refs);

    // script only covers the first of two blocks
    let mode = biasharness::EvaluationMode::Blocks { size: 2 };
    let units = units_for(&dataset, &mode);
    let script = serde_json::json!({
        "mode": "keyed",
        "by_content": {units[0].1.clone(): findings_for(&dataset, &[0], 0.9)}
    });
    let script_path = dir.path().join("script.json");
    std::fs::write(&script_path, script.to_string()).unwrap();

    let output = bin()
        .args(["run", "--mode", "blocks", "--block-size", "2", "--dataset"])
        .arg(&csv_path)
        .arg("--endpoint")
        .arg(format!("mock:{}", script_path.display()))
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("--cache-dir")
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(5), "stderr: {}", stderr(&output));
    let text = stdout(&output);
    assert!(text.contains("coverage: 50.00% (1 of 2 units)"), "got: {text}");
}
