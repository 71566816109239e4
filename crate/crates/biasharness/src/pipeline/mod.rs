//! Detection-run orchestration: block formation, dispatch, parsing,
//! filtering, thresholding and alignment, with every intermediate result
//! captured in a persistable run record.

mod align;
mod parse;

pub use align::{align_findings, edit_similarity, normalize_for_match, AlignConfig, AlignedFinding, MatchKind};
pub use parse::{parse_findings, ParseOutcome};

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::backend::{cached_complete, Backend, ChatRequest, FileCache};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::prompting::{build_prompt, render_messages, PromptSpec, TemplateSet};
use crate::types::{validate_finding, AliasTable, BiasFinding, BiasType, ValidatedFinding};

/// How sentences are posed to the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EvaluationMode {
    /// Sentences joined in fixed-size groups, one request per group.
    Blocks { size: usize },
    /// One request per sentence.
    Individual,
}

impl EvaluationMode {
    pub const DEFAULT_BLOCK_SIZE: usize = 10;

    pub fn blocks_default() -> Self {
        EvaluationMode::Blocks {
            size: Self::DEFAULT_BLOCK_SIZE,
        }
    }
}

impl std::fmt::Display for EvaluationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvaluationMode::Blocks { size } => write!(f, "blocks({size})"),
            EvaluationMode::Individual => write!(f, "individual"),
        }
    }
}

/// A group of sentences joined for one request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub sentence_ids: Vec<usize>,
    /// Member texts joined with single line breaks; splitting on `\n`
    /// reproduces the member texts exactly.
    pub text: String,
}

impl Block {
    pub fn split(&self) -> Vec<&str> {
        self.text.split('\n').collect()
    }
}

/// Partition a prepared dataset into consecutive fixed-size blocks.
/// The concatenation of all blocks' sentence ids equals the dataset order.
pub fn make_blocks(dataset: &Dataset, size: usize) -> Result<Vec<Block>> {
    if size == 0 {
        return Err(Error::Config("block size must be at least 1".into()));
    }
    if !dataset.len().is_multiple_of(size) {
        return Err(Error::Data(format!(
            "dataset size {} is not divisible by block size {size}; prepare_for_mode was skipped",
            dataset.len()
        )));
    }
    Ok(dataset
        .sentences
        .chunks(size)
        .map(|chunk| Block {
            sentence_ids: chunk.iter().map(|s| s.id).collect(),
            text: chunk
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join("\n"),
        })
        .collect())
}

/// Drop explicit non-findings: bias type "none" or a bias score of exactly
/// zero. Order is preserved; idempotent.
pub fn filter_findings(findings: &[BiasFinding]) -> Vec<BiasFinding> {
    findings
        .iter()
        .filter(|f| f.bias_type != BiasType::None && f.bias_score != 0.0)
        .cloned()
        .collect()
}

/// Keep findings whose score is at least `threshold`. Monotone and
/// idempotent.
pub fn apply_threshold(findings: &[BiasFinding], threshold: f64) -> Result<Vec<BiasFinding>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config("score threshold must lie in [0,1]".into()));
    }
    Ok(findings
        .iter()
        .filter(|f| f.bias_score >= threshold)
        .cloned()
        .collect())
}

/// Everything recorded about one evaluation unit (block or sentence).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub index: usize,
    pub sentence_ids: Vec<usize>,
    pub input_text: String,
    /// Raw completion text; absent when the backend failed.
    pub raw_output: Option<String>,
    /// Backend failure description, when the request never completed.
    pub backend_error: Option<String>,
    /// Parse outcome of the raw output; absent when the backend failed.
    pub parse: Option<ParseOutcome>,
    /// All findings that passed validation, before filtering.
    pub validated: Vec<ValidatedFinding>,
    /// Reasons for findings rejected during validation.
    pub rejected: Vec<String>,
    /// Findings attributed to unit sentences after filter and threshold.
    pub aligned: Vec<AlignedFinding>,
    /// Hallucinated findings: nothing in the unit matched them.
    pub unmatched: Vec<BiasFinding>,
}

impl UnitRecord {
    pub fn is_covered(&self) -> bool {
        matches!(&self.parse, Some(outcome) if !outcome.is_failed())
    }
}

/// Identity of a detection run, persisted alongside its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset_path: String,
    pub dataset_sha256: String,
    pub mode: EvaluationMode,
    pub variant: String,
    pub spec: PromptSpec,
    pub model: String,
    pub backend: String,
    pub seed: u64,
    pub concurrency: usize,
    pub unit_count: usize,
    pub covered_units: usize,
    /// Column and label mapping the dataset was loaded with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_map: Option<crate::dataset::ColumnMap>,
    pub created_at: String,
}

/// Full record of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRun {
    pub manifest: RunManifest,
    pub units: Vec<UnitRecord>,
    /// Ids of sentences with at least one aligned finding.
    pub flagged: BTreeSet<usize>,
}

/// Parameters of a detection run beyond dataset and backend.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub model: String,
    pub variant: String,
    pub spec: PromptSpec,
    pub mode: EvaluationMode,
    pub concurrency: usize,
    pub seed: u64,
    pub align: AlignConfig,
    pub aliases: AliasTable,
    /// Recorded in the manifest so runs stay tied to their label mapping.
    pub column_map: Option<crate::dataset::ColumnMap>,
}

impl RunOptions {
    pub fn new(model: impl Into<String>, variant: &str, spec: PromptSpec, mode: EvaluationMode) -> Self {
        RunOptions {
            model: model.into(),
            variant: variant.to_string(),
            spec,
            mode,
            concurrency: 4,
            seed: 0,
            align: AlignConfig::default(),
            aliases: AliasTable::default(),
            column_map: None,
        }
    }
}

struct Unit {
    index: usize,
    sentence_ids: Vec<usize>,
    text: String,
}

fn build_units(dataset: &Dataset, mode: &EvaluationMode) -> Result<Vec<Unit>> {
    match mode {
        EvaluationMode::Blocks { size } => Ok(make_blocks(dataset, *size)?
            .into_iter()
            .enumerate()
            .map(|(index, block)| Unit {
                index,
                sentence_ids: block.sentence_ids,
                text: block.text,
            })
            .collect()),
        EvaluationMode::Individual => Ok(dataset
            .sentences
            .iter()
            .enumerate()
            .map(|(index, s)| Unit {
                index,
                sentence_ids: vec![s.id],
                text: s.text.clone(),
            })
            .collect()),
    }
}

fn process_unit(
    unit: &Unit,
    text_by_id: &std::collections::HashMap<usize, &str>,
    options: &RunOptions,
    bundle: &crate::prompting::PromptBundle,
    backend: &dyn Backend,
    cache: &FileCache,
) -> UnitRecord {
    let mut record = UnitRecord {
        index: unit.index,
        sentence_ids: unit.sentence_ids.clone(),
        input_text: unit.text.clone(),
        raw_output: None,
        backend_error: None,
        parse: None,
        validated: Vec::new(),
        rejected: Vec::new(),
        aligned: Vec::new(),
        unmatched: Vec::new(),
    };

    let messages = match render_messages(bundle, &unit.text) {
        Ok(m) => m,
        Err(e) => {
            record.backend_error = Some(format!("cannot render messages: {e}"));
            return record;
        }
    };
    let request = match ChatRequest::new(options.model.clone(), messages, options.spec.temperature)
    {
        Ok(r) => r,
        Err(e) => {
            record.backend_error = Some(e.to_string());
            return record;
        }
    };

    let completion = match cached_complete(&request, backend, cache) {
        Ok(c) => c,
        Err(e) => {
            record.backend_error = Some(e.to_string());
            return record;
        }
    };
    record.raw_output = Some(completion.text.clone());

    let outcome = parse_findings(&completion.text);
    for raw in outcome.findings() {
        match validate_finding(raw, &options.aliases) {
            Ok(v) => record.validated.push(v),
            Err(reason) => record.rejected.push(reason),
        }
    }
    record.parse = Some(outcome);

    let findings: Vec<BiasFinding> = record.validated.iter().map(|v| v.finding.clone()).collect();
    let mut kept = filter_findings(&findings);
    if let Some(threshold) = options.spec.score_threshold {
        kept = apply_threshold(&kept, threshold).expect("spec threshold was validated");
    }

    let sentence_texts: Vec<(usize, &str)> = unit
        .sentence_ids
        .iter()
        .map(|id| (*id, text_by_id.get(id).copied().unwrap_or_default()))
        .collect();
    let (aligned, unmatched) = align_findings(&kept, &sentence_texts, &options.align);
    record.aligned = aligned;
    record.unmatched = unmatched;
    record
}

/// Run detection over a prepared dataset.
///
/// Units are dispatched concurrently up to `options.concurrency` in-flight
/// requests and reassembled in input order, so concurrency never changes the
/// outputs. Backend failures are recorded per unit; the run completes with
/// partial coverage instead of aborting.
pub fn run_detection(
    dataset: &Dataset,
    options: &RunOptions,
    templates: &TemplateSet,
    backend: &dyn Backend,
    cache: &FileCache,
) -> Result<DetectionRun> {
    options.spec.validate()?;
    let bundle = build_prompt(&options.spec, templates)?;
    let units = build_units(dataset, &options.mode)?;
    let text_by_id: std::collections::HashMap<usize, &str> = dataset
        .sentences
        .iter()
        .map(|s| (s.id, s.text.as_str()))
        .collect();

    let slots: Vec<Mutex<Option<UnitRecord>>> =
        units.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.concurrency.clamp(1, units.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= units.len() {
                    break;
                }
                let record =
                    process_unit(&units[i], &text_by_id, options, &bundle, backend, cache);
                *slots[i].lock().expect("slot lock") = Some(record);
            });
        }
    });

    let units: Vec<UnitRecord> = slots
        .into_iter()
        .map(|slot| slot.into_inner().expect("slot lock").expect("all units processed"))
        .collect();

    let mut flagged = BTreeSet::new();
    for unit in &units {
        for aligned in &unit.aligned {
            flagged.insert(aligned.sentence_id);
        }
    }
    let covered_units = units.iter().filter(|u| u.is_covered()).count();

    Ok(DetectionRun {
        manifest: RunManifest {
            dataset_path: dataset.provenance.path.clone(),
            dataset_sha256: dataset.provenance.sha256.clone(),
            mode: options.mode,
            variant: options.variant.clone(),
            spec: options.spec.clone(),
            model: options.model.clone(),
            backend: backend.describe(),
            seed: options.seed,
            concurrency: options.concurrency,
            unit_count: units.len(),
            covered_units,
            column_map: options.column_map.clone(),
            created_at: chrono::Utc::now().to_rfc3339(),
        },
        units,
        flagged,
    })
}

impl DetectionRun {
    /// Fraction of units with a parseable response.
    pub fn coverage(&self) -> f64 {
        if self.units.is_empty() {
            return 1.0;
        }
        self.manifest.covered_units as f64 / self.units.len() as f64
    }

    /// All sentence ids this run evaluated, in unit order.
    pub fn evaluated_ids(&self) -> Vec<usize> {
        self.units
            .iter()
            .flat_map(|u| u.sentence_ids.iter().copied())
            .collect()
    }

    /// Every aligned finding across all units, in unit order.
    pub fn aligned_findings(&self) -> impl Iterator<Item = &AlignedFinding> {
        self.units.iter().flat_map(|u| u.aligned.iter())
    }

    /// One finding per flagged sentence: duplicates collapse to the
    /// highest-score finding. The full set stays in the unit records.
    pub fn collapsed_by_sentence(&self) -> Vec<AlignedFinding> {
        let mut best: std::collections::BTreeMap<usize, &AlignedFinding> =
            std::collections::BTreeMap::new();
        for aligned in self.aligned_findings() {
            best.entry(aligned.sentence_id)
                .and_modify(|current| {
                    if aligned.finding.bias_score > current.finding.bias_score {
                        *current = aligned;
                    }
                })
                .or_insert(aligned);
        }
        best.into_values().cloned().collect()
    }

    /// Count of parse failures across units.
    pub fn parse_failures(&self) -> usize {
        self.units
            .iter()
            .filter(|u| matches!(&u.parse, Some(o) if o.is_failed()))
            .count()
    }

    /// Persist the run as a directory: `manifest.json`, one raw record per
    /// unit under `units/`, consolidated `findings.json` and `flagged.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir.join("units"))?;
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_vec_pretty(&self.manifest)?,
        )?;
        for unit in &self.units {
            std::fs::write(
                dir.join("units").join(format!("unit_{:05}.json", unit.index)),
                serde_json::to_vec_pretty(unit)?,
            )?;
        }
        let findings: Vec<&AlignedFinding> = self.aligned_findings().collect();
        std::fs::write(dir.join("findings.json"), serde_json::to_vec_pretty(&findings)?)?;
        let flagged: Vec<usize> = self.flagged.iter().copied().collect();
        std::fs::write(dir.join("flagged.json"), serde_json::to_vec_pretty(&flagged)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<DetectionRun> {
        let manifest: RunManifest =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)?;
        let mut unit_paths: Vec<_> = std::fs::read_dir(dir.join("units"))?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|entry| entry.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        unit_paths.sort();
        let mut units = Vec::with_capacity(unit_paths.len());
        for path in unit_paths {
            let unit: UnitRecord = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            units.push(unit);
        }
        let mut flagged = BTreeSet::new();
        for unit in &units {
            for aligned in &unit.aligned {
                flagged.insert(aligned.sentence_id);
            }
        }
        Ok(DetectionRun {
            manifest,
            units,
            flagged,
        })
    }
}
