//! Build chat-format fine-tuning examples and the held-out remainder.
//!
//! ```bash
//! cargo run --example finetune_export
//! ```

use std::collections::HashMap;

use biasharness::{
    build_finetune_set, write_jsonl, BiasType, Dataset, EvaluationMode, GoldLabel, OracleFinding,
    PromptSpec, Provenance, Sentence, TemplateSet,
};

fn main() -> biasharness::Result<()> {
    let sentences: Vec<Sentence> = (0..20)
        .map(|id| Sentence {
            id,
            text: format!("Fine-tune demo statement {id} on the transit strike."),
            gold: if id % 4 == 0 { GoldLabel::NonBiased } else { GoldLabel::Biased },
            outlet: None,
            topic: None,
        })
        .collect();
    let dataset = Dataset::from_sentences(sentences, Provenance::synthetic("finetune-demo"))?;

    // an oracle supplies type/score/description for every gold-biased
    // sentence; here it is hand-authored, in practice a stronger model fills
    // it in
    let oracle: HashMap<usize, OracleFinding> = dataset
        .sentences
        .iter()
        .filter(|s| s.gold == GoldLabel::Biased)
        .map(|s| {
            (
                s.id,
                OracleFinding {
                    bias_type: BiasType::Political,
                    bias_score: None, // defaults to 0.5, the format filler
                    description: "slants the strike coverage".into(),
                },
            )
        })
        .collect();

    let set = build_finetune_set(
        &dataset,
        3,
        &EvaluationMode::Blocks { size: 5 },
        &PromptSpec::base(),
        &TemplateSet::builtin(),
        &oracle,
        7,
    )?;

    println!(
        "built {} examples; consumed ids {:?}; {} sentences remain",
        set.examples.len(),
        set.consumed_ids,
        set.remaining.len()
    );

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("train.jsonl");
    write_jsonl(&set.examples, &path)?;
    println!("wrote {}", path.display());

    let first_line = std::fs::read_to_string(&path)?.lines().next().unwrap().to_string();
    let pretty: serde_json::Value = serde_json::from_str(&first_line)?;
    println!("\nfirst example:\n{}", serde_json::to_string_pretty(&pretty)?);
    Ok(())
}
