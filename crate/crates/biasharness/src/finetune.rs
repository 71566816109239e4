//! Supervised fine-tuning example construction and JSONL export.
//!
//! Examples pair the detection prompt with the desired finding array for a
//! unit. Consumed sentences are removed from the returned remainder so
//! later evaluation never sees its own training data.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::EvaluationMode;
use crate::prompting::{build_prompt, render_messages, PromptSpec, TemplateSet};
use crate::types::{BiasType, FindingOut, GoldLabel};

/// One chat-format training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneExample {
    /// Instruction text; empty when the prompt variant sends no system
    /// message (its content then lives at the start of `user`).
    pub system: String,
    /// One block or one sentence.
    pub user: String,
    /// The desired finding array, strictly parseable.
    pub assistant: String,
}

/// Type, score and description for one gold-biased sentence, supplied by an
/// external oracle (a stronger model, or hand authoring).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFinding {
    pub bias_type: BiasType,
    /// Absent scores default to 0.5: the value only keeps the output in
    /// format, it never affects binary evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_score: Option<f64>,
    #[serde(default)]
    pub description: String,
}

/// Result of building a fine-tune set.
#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneSet {
    pub examples: Vec<FinetuneExample>,
    /// The prepared dataset minus every consumed sentence, original order.
    pub remaining: Dataset,
    pub consumed_ids: Vec<usize>,
    pub seed: u64,
}

/// Build `n` training examples from a prepared dataset.
///
/// Units (blocks or single sentences) are shuffled with the seeded generator
/// and the first `n` become examples, so the split is reproducible from the
/// seed alone. Gold-biased sentences appear in the assistant findings;
/// gold-non-biased sentences never do.
pub fn build_finetune_set(
    dataset: &Dataset,
    n: usize,
    mode: &EvaluationMode,
    spec: &PromptSpec,
    templates: &TemplateSet,
    oracle: &HashMap<usize, OracleFinding>,
    seed: u64,
) -> Result<FinetuneSet> {
    let bundle = build_prompt(spec, templates)?;

    let units: Vec<Vec<usize>> = match mode {
        EvaluationMode::Blocks { size } => crate::pipeline::make_blocks(dataset, *size)?
            .into_iter()
            .map(|b| b.sentence_ids)
            .collect(),
        EvaluationMode::Individual => dataset.sentences.iter().map(|s| vec![s.id]).collect(),
    };
    if n > units.len() {
        return Err(Error::Config(format!(
            "requested {n} fine-tune examples but the dataset only yields {} units",
            units.len()
        )));
    }

    let mut order: Vec<usize> = (0..units.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let selected: Vec<&Vec<usize>> = order[..n].iter().map(|i| &units[*i]).collect();

    let by_id: HashMap<usize, &crate::dataset::Sentence> =
        dataset.sentences.iter().map(|s| (s.id, s)).collect();

    let mut missing: Vec<usize> = Vec::new();
    for unit in &selected {
        for id in unit.iter() {
            let sentence = by_id[id];
            if sentence.gold == GoldLabel::Biased && !oracle.contains_key(id) {
                missing.push(*id);
            }
        }
    }
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::Data(format!(
            "oracle findings missing for biased sentence ids: {}",
            missing
                .iter()
                .map(|id| id.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }

    let mut examples = Vec::with_capacity(n);
    let mut consumed: BTreeSet<usize> = BTreeSet::new();
    for unit in &selected {
        let texts: Vec<&str> = unit.iter().map(|id| by_id[id].text.as_str()).collect();
        let content = texts.join("\n");
        let messages = render_messages(&bundle, &content)?;
        let (system, user) = match messages.as_slice() {
            [system, user] => (system.content.clone(), user.content.clone()),
            [user] => (String::new(), user.content.clone()),
            _ => unreachable!("render_messages yields one or two messages"),
        };

        let findings: Vec<FindingOut> = unit
            .iter()
            .filter(|id| by_id[id].gold == GoldLabel::Biased)
            .map(|id| {
                let oracle_entry = &oracle[id];
                FindingOut {
                    sentence: by_id[id].text.clone(),
                    bias_type: oracle_entry.bias_type.display_name().to_string(),
                    bias_score: oracle_entry.bias_score.unwrap_or(0.5),
                    bias_description: oracle_entry.description.clone(),
                }
            })
            .collect();

        examples.push(FinetuneExample {
            system,
            user,
            assistant: crate::types::findings_to_canonical_json(&findings),
        });
        consumed.extend(unit.iter().copied());
    }

    let remaining_sentences: Vec<crate::dataset::Sentence> = dataset
        .sentences
        .iter()
        .filter(|s| !consumed.contains(&s.id))
        .cloned()
        .collect();
    let mut remaining = Dataset::from_sentences(remaining_sentences, dataset.provenance.clone())?;
    remaining.cleaned = dataset.cleaned;

    Ok(FinetuneSet {
        examples,
        remaining,
        consumed_ids: consumed.into_iter().collect(),
        seed,
    })
}

#[derive(Serialize, Deserialize)]
struct JsonlLine {
    messages: Vec<JsonlMessage>,
}

#[derive(Serialize, Deserialize)]
struct JsonlMessage {
    role: String,
    content: String,
}

/// Write examples as chat-format JSONL, one example per line, newline
/// terminated.
pub fn write_jsonl(examples: &[FinetuneExample], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for example in examples {
        let mut messages = Vec::with_capacity(3);
        if !example.system.is_empty() {
            messages.push(JsonlMessage {
                role: "system".into(),
                content: example.system.clone(),
            });
        }
        messages.push(JsonlMessage {
            role: "user".into(),
            content: example.user.clone(),
        });
        messages.push(JsonlMessage {
            role: "assistant".into(),
            content: example.assistant.clone(),
        });
        let line = serde_json::to_string(&JsonlLine { messages })?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;
    Ok(())
}

/// Read a chat-format JSONL file back into examples.
pub fn read_jsonl(path: &Path) -> Result<Vec<FinetuneExample>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut examples = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonlLine = serde_json::from_str(&line)
            .map_err(|e| Error::Data(format!("line {}: {e}", i + 1)))?;
        let mut system = String::new();
        let mut user = String::new();
        let mut assistant = String::new();
        for message in parsed.messages {
            match message.role.as_str() {
                "system" => system = message.content,
                "user" => user = message.content,
                "assistant" => assistant = message.content,
                other => {
                    return Err(Error::Data(format!(
                        "line {}: unexpected role {other:?}",
                        i + 1
                    )))
                }
            }
        }
        examples.push(FinetuneExample {
            system,
            user,
            assistant,
        });
    }
    Ok(examples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Provenance, Sentence};
    use crate::pipeline::{parse_findings, ParseOutcome};

    fn fixture(total: usize) -> (Dataset, HashMap<usize, OracleFinding>) {
        let sentences: Vec<Sentence> = (0..total)
            .map(|id| Sentence {
                id,
                text: format!("Statement number {id} about local politics."),
                gold: if id % 3 == 0 {
                    GoldLabel::NonBiased
                } else {
                    GoldLabel::Biased
                },
                outlet: None,
                topic: None,
            })
            .collect();
        let dataset =
            Dataset::from_sentences(sentences, Provenance::synthetic("finetune-tests")).unwrap();
        let oracle = dataset
            .sentences
            .iter()
            .filter(|s| s.gold == GoldLabel::Biased)
            .map(|s| {
                (
                    s.id,
                    OracleFinding {
                        bias_type: BiasType::Political,
                        bias_score: None,
                        description: "slanted phrasing".into(),
                    },
                )
            })
            .collect();
        (dataset, oracle)
    }

    fn spec() -> PromptSpec {
        PromptSpec::base()
    }

    #[test]
    fn block_mode_consumes_whole_blocks() {
        let (dataset, oracle) = fixture(20);
        let set = build_finetune_set(
            &dataset,
            3,
            &EvaluationMode::Blocks { size: 2 },
            &spec(),
            &TemplateSet::builtin(),
            &oracle,
            7,
        )
        .unwrap();
        assert_eq!(set.examples.len(), 3);
        assert_eq!(set.consumed_ids.len(), 6);
        assert_eq!(set.remaining.len(), 14);
        // partition: consumed and remaining are disjoint and cover the input
        let remaining_ids: BTreeSet<usize> = set.remaining.sentences.iter().map(|s| s.id).collect();
        for id in &set.consumed_ids {
            assert!(!remaining_ids.contains(id));
        }
        assert_eq!(remaining_ids.len() + set.consumed_ids.len(), dataset.len());
    }

    #[test]
    fn assistant_outputs_are_strictly_parseable_and_gold_faithful() {
        let (dataset, oracle) = fixture(12);
        let set = build_finetune_set(
            &dataset,
            6,
            &EvaluationMode::Individual,
            &spec(),
            &TemplateSet::builtin(),
            &oracle,
            1,
        )
        .unwrap();
        for example in &set.examples {
            match parse_findings(&example.assistant) {
                ParseOutcome::Parsed { findings } => {
                    for finding in &findings {
                        let text = finding.sentence_text.as_deref().unwrap();
                        assert!(example.user.contains(text));
                    }
                }
                other => panic!("assistant output not strictly parseable: {other:?}"),
            }
        }
    }

    #[test]
    fn biased_sentences_appear_and_non_biased_do_not() {
        let (dataset, oracle) = fixture(10);
        let set = build_finetune_set(
            &dataset,
            5,
            &EvaluationMode::Blocks { size: 2 },
            &spec(),
            &TemplateSet::builtin(),
            &oracle,
            3,
        )
        .unwrap();
        let by_id: HashMap<usize, &Sentence> =
            dataset.sentences.iter().map(|s| (s.id, s)).collect();
        for example in &set.examples {
            for line in example.user.lines().filter(|l| by_id.values().any(|s| s.text == *l)) {
                let sentence = by_id.values().find(|s| s.text == line).unwrap();
                let in_findings = example.assistant.contains(&format!(
                    "\"sentence\": {}",
                    serde_json::to_string(&sentence.text).unwrap()
                ));
                assert_eq!(
                    in_findings,
                    sentence.gold == GoldLabel::Biased,
                    "sentence {} gold {:?}",
                    sentence.id,
                    sentence.gold
                );
            }
        }
    }

    #[test]
    fn same_seed_same_split() {
        let (dataset, oracle) = fixture(20);
        let mode = EvaluationMode::Blocks { size: 2 };
        let a = build_finetune_set(&dataset, 4, &mode, &spec(), &TemplateSet::builtin(), &oracle, 42).unwrap();
        let b = build_finetune_set(&dataset, 4, &mode, &spec(), &TemplateSet::builtin(), &oracle, 42).unwrap();
        assert_eq!(a.consumed_ids, b.consumed_ids);
        let c = build_finetune_set(&dataset, 4, &mode, &spec(), &TemplateSet::builtin(), &oracle, 43).unwrap();
        assert!(a.consumed_ids != c.consumed_ids || a.examples == c.examples);
    }

    #[test]
    fn zero_examples_leaves_dataset_unchanged() {
        let (dataset, oracle) = fixture(10);
        let set = build_finetune_set(
            &dataset,
            0,
            &EvaluationMode::Individual,
            &spec(),
            &TemplateSet::builtin(),
            &oracle,
            0,
        )
        .unwrap();
        assert!(set.examples.is_empty());
        assert_eq!(set.remaining.len(), dataset.len());
    }

    #[test]
    fn missing_oracle_entries_are_listed() {
        let (dataset, _) = fixture(6);
        let err = build_finetune_set(
            &dataset,
            6,
            &EvaluationMode::Individual,
            &spec(),
            &TemplateSet::builtin(),
            &HashMap::new(),
            0,
        )
        .unwrap_err();
        let message = err.to_string();
        assert!(message.contains("oracle findings missing"));
        assert!(message.contains('1'), "message: {message}");
    }

    #[test]
    fn n_beyond_unit_count_is_an_error() {
        let (dataset, oracle) = fixture(4);
        assert!(build_finetune_set(
            &dataset,
            5,
            &EvaluationMode::Individual,
            &spec(),
            &TemplateSet::builtin(),
            &oracle,
            0
        )
        .is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let (dataset, oracle) = fixture(6);
        let set = build_finetune_set(
            &dataset,
            3,
            &EvaluationMode::Individual,
            &spec(),
            &TemplateSet::builtin(),
            &oracle,
            0,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        write_jsonl(&set.examples, &path).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.ends_with('\n'));

        let reread = read_jsonl(&path).unwrap();
        assert_eq!(reread, set.examples);
    }
}
