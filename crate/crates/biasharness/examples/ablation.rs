//! Compare every prompt variant of the catalog on a scripted backend and
//! render the comparison table.
//!
//! ```bash
//! cargo run --example ablation
//! ```

use biasharness::{
    ablation_table, build_prompt, render_messages, run_detection, Dataset, EvaluationMode,
    FileCache, GoldLabel, MockBackend, Provenance, ReportFormat, RunOptions, Sentence,
    TemplateSet, VARIANT_NAMES,
};

fn main() -> biasharness::Result<()> {
    let sentences: Vec<Sentence> = (0..10)
        .map(|id| Sentence {
            id,
            text: format!("Ablation demo statement {id} about the harbour expansion."),
            gold: if id < 6 { GoldLabel::Biased } else { GoldLabel::NonBiased },
            outlet: None,
            topic: None,
        })
        .collect();
    let dataset = Dataset::from_sentences(sentences, Provenance::synthetic("ablation"))?;
    let mode = EvaluationMode::Blocks { size: 5 };
    let templates = TemplateSet::builtin();

    // one scripted backend per variant: keys differ because the no-system
    // variant renders its instructions into the user message. Scores of 0.55
    // make the threshold variant visibly stricter.
    let detected = [0usize, 1, 2, 3, 7];
    let backend_for = |spec: &biasharness::PromptSpec| -> biasharness::Result<MockBackend> {
        let bundle = build_prompt(spec, &templates)?;
        let mut script = std::collections::HashMap::new();
        for block in biasharness::make_blocks(&dataset, 5)? {
            let findings: Vec<serde_json::Value> = dataset
                .sentences
                .iter()
                .filter(|s| block.sentence_ids.contains(&s.id) && detected.contains(&s.id))
                .map(|s| {
                    serde_json::json!({
                        "sentence": s.text,
                        "bias_type": "political bias",
                        "bias_score": 0.55,
                        "bias_description": "scripted",
                    })
                })
                .collect();
            let key = render_messages(&bundle, &block.text)?
                .last()
                .unwrap()
                .content
                .clone();
            script.insert(key, serde_json::to_string(&findings).unwrap());
        }
        Ok(MockBackend::keyed_by_content(script))
    };

    let cache_dir = tempfile::tempdir()?;
    let mut runs = Vec::new();
    for name in VARIANT_NAMES {
        let spec = biasharness::variant_spec(name)?;
        let backend = backend_for(&spec)?;
        let options = RunOptions::new("demo-model", name, spec, mode);
        runs.push(run_detection(
            &dataset,
            &options,
            &templates,
            &backend,
            &FileCache::new(cache_dir.path()),
        )?);
    }

    let run_refs: Vec<&biasharness::DetectionRun> = runs.iter().collect();
    let rows = ablation_table(&run_refs, &dataset)?;
    println!("{}", biasharness::render_ablation(&rows, ReportFormat::Markdown));
    println!("(arrows compare each variant to the base row; threshold-0.6 drops the 0.55-score findings)");
    Ok(())
}
