//! Full detection run against a deterministic scripted backend, scored
//! against gold labels.
//!
//! ```bash
//! cargo run --example mock_run
//! ```

use biasharness::{
    confusion, make_blocks, run_detection, Dataset, EvaluationMode, FileCache, GoldLabel,
    MockBackend, Provenance, ReportFormat, ReportRow, RunOptions, Sentence, TemplateSet,
};

fn main() -> biasharness::Result<()> {
    // twelve sentences, ids 0..11; even ids carry a Biased gold label
    let sentences: Vec<Sentence> = (0..12)
        .map(|id| Sentence {
            id,
            text: format!("Example statement {id} about the water board election."),
            gold: if id % 2 == 0 { GoldLabel::Biased } else { GoldLabel::NonBiased },
            outlet: None,
            topic: None,
        })
        .collect();
    let dataset = Dataset::from_sentences(sentences, Provenance::synthetic("mock-run"))?;

    // script the backend: it "detects" bias in sentences 0,2,3,6 (two true
    // positives per block, one false positive)
    let mode = EvaluationMode::Blocks { size: 4 };
    let detected = [0usize, 2, 3, 6];
    let mut script = std::collections::HashMap::new();
    for block in make_blocks(&dataset, 4)? {
        let findings: Vec<serde_json::Value> = dataset
            .sentences
            .iter()
            .filter(|s| block.sentence_ids.contains(&s.id) && detected.contains(&s.id))
            .map(|s| {
                serde_json::json!({
                    "sentence": s.text,
                    "bias_type": "political bias",
                    "bias_score": 0.8,
                    "bias_description": "scripted demonstration finding",
                })
            })
            .collect();
        script.insert(block.text, serde_json::to_string(&findings).unwrap());
    }
    let backend = MockBackend::keyed_by_content(script);

    let cache_dir = tempfile::tempdir()?;
    let options = RunOptions::new("demo-model", "base", biasharness::variant_spec("base")?, mode);
    let run = run_detection(
        &dataset,
        &options,
        &TemplateSet::builtin(),
        &backend,
        &FileCache::new(cache_dir.path()),
    )?;

    println!("flagged sentence ids: {:?}", run.flagged);
    println!(
        "coverage: {} of {} units, {} parse failures",
        run.manifest.covered_units,
        run.manifest.unit_count,
        run.parse_failures()
    );

    let cm = confusion(&run, &dataset)?;
    let table = biasharness::render_report(
        &[ReportRow::new("scripted demo", cm)],
        ReportFormat::Markdown,
    );
    println!("\n{table}");

    println!("bias-type distribution over aligned findings:");
    for (label, count, share) in biasharness::type_distribution(&run)? {
        println!("  {label}: {count} ({share:.1}%)");
    }

    // persist the run directory like the CLI does
    let out = tempfile::tempdir()?;
    run.save(out.path())?;
    println!("run directory written to {}", out.path().display());
    Ok(())
}
