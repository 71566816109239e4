//! Scoring detection runs against gold labels: confusion matrices, derived
//! metrics, ablation comparisons, bias-type distributions and the
//! silver-label subtype evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::DetectionRun;
use crate::types::{parse_bias_type, BiasType, GoldLabel, CANONICAL_TYPES};

/// Binary classification counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        ConfusionMatrix {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            true_negatives: tn,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

/// Precision, recall and F1 derived from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any denominator was zero; the affected metrics read 0.
    pub degenerate: bool,
}

/// Standard definitions: P = tp/(tp+fp), R = tp/(tp+fn), F1 their harmonic
/// mean. Zero denominators yield 0 and set the degenerate flag instead of
/// crashing pathological runs.
pub fn metrics(cm: &ConfusionMatrix) -> Metrics {
    let tp = cm.true_positives as f64;
    let positive_predictions = cm.true_positives + cm.false_positives;
    let gold_positives = cm.true_positives + cm.false_negatives;

    let mut degenerate = false;
    let precision = if positive_predictions == 0 {
        degenerate = true;
        0.0
    } else {
        tp / positive_predictions as f64
    };
    let recall = if gold_positives == 0 {
        degenerate = true;
        0.0
    } else {
        tp / gold_positives as f64
    };
    let f1 = if precision + recall == 0.0 {
        degenerate = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
        degenerate,
    }
}

/// Score a run against the gold labels of the sentences it evaluated.
///
/// A sentence counts as positive when the run flagged it. Every sentence of
/// every unit is scored, covered or not, so the counts always sum to the
/// evaluated size; coverage is reported separately.
pub fn confusion(run: &DetectionRun, dataset: &Dataset) -> Result<ConfusionMatrix> {
    if run.manifest.dataset_sha256 != dataset.provenance.sha256 {
        return Err(Error::Data(format!(
            "run was produced from dataset {} but scoring against {}",
            run.manifest.dataset_sha256, dataset.provenance.sha256
        )));
    }
    let gold = dataset.gold_by_id();
    let mut cm = ConfusionMatrix::new(0, 0, 0, 0);
    for id in run.evaluated_ids() {
        let label = gold.get(&id).ok_or_else(|| {
            Error::Data(format!("run evaluated sentence {id} which the dataset lacks"))
        })?;
        let flagged = run.flagged.contains(&id);
        match (flagged, label) {
            (true, GoldLabel::Biased) => cm.true_positives += 1,
            (true, GoldLabel::NonBiased) => cm.false_positives += 1,
            (false, GoldLabel::Biased) => cm.false_negatives += 1,
            (false, GoldLabel::NonBiased) => cm.true_negatives += 1,
            (_, GoldLabel::Undecided) => {
                return Err(Error::Data(format!(
                    "evaluated sentence {id} still carries an undecided gold label"
                )))
            }
        }
    }
    Ok(cm)
}

/// Direction of a metric relative to the base row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Flat,
}

impl Direction {
    fn of(value: f64, base: f64) -> Direction {
        if value > base {
            Direction::Up
        } else if value < base {
            Direction::Down
        } else {
            Direction::Flat
        }
    }

    pub fn marker(&self) -> &'static str {
        match self {
            Direction::Up => "↑",
            Direction::Down => "↓",
            Direction::Flat => "·",
        }
    }
}

/// Per-metric movement vs the base row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub f1: Direction,
    pub recall: Direction,
    pub precision: Direction,
}

/// One row of an ablation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub cm: ConfusionMatrix,
    pub metrics: Metrics,
    /// Absent on the base row and on single-row tables.
    pub deltas: Option<MetricDeltas>,
    pub best_f1: bool,
    pub best_recall: bool,
    pub best_precision: bool,
}

/// Build comparison rows from named confusion matrices. The first row is
/// the base every delta refers to.
pub fn ablation_rows(named: &[(String, ConfusionMatrix)]) -> Vec<AblationRow> {
    let computed: Vec<Metrics> = named.iter().map(|(_, cm)| metrics(cm)).collect();
    let max_of = |select: fn(&Metrics) -> f64| {
        computed
            .iter()
            .map(select)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let best_f1 = max_of(|m| m.f1);
    let best_recall = max_of(|m| m.recall);
    let best_precision = max_of(|m| m.precision);
    let base = computed.first().copied();

    named
        .iter()
        .zip(computed.iter())
        .enumerate()
        .map(|(i, ((name, cm), m))| AblationRow {
            name: name.clone(),
            cm: *cm,
            metrics: *m,
            deltas: match (i, base, named.len()) {
                (0, _, _) | (_, None, _) | (_, _, 1) => None,
                (_, Some(base), _) => Some(MetricDeltas {
                    f1: Direction::of(m.f1, base.f1),
                    recall: Direction::of(m.recall, base.recall),
                    precision: Direction::of(m.precision, base.precision),
                }),
            },
            best_f1: m.f1 == best_f1,
            best_recall: m.recall == best_recall,
            best_precision: m.precision == best_precision,
        })
        .collect()
}

/// Score several runs of the same dataset and mode into a comparison table,
/// in input order, first row as base.
pub fn ablation_table(runs: &[&DetectionRun], dataset: &Dataset) -> Result<Vec<AblationRow>> {
    let mut named = Vec::with_capacity(runs.len());
    for run in runs {
        if run.manifest.dataset_sha256 != dataset.provenance.sha256 {
            return Err(Error::Data(format!(
                "run {:?} was produced from a different dataset",
                run.manifest.variant
            )));
        }
        if run.manifest.mode != runs[0].manifest.mode {
            return Err(Error::Data(format!(
                "run {:?} uses mode {} but the table is for {}",
                run.manifest.variant, run.manifest.mode, runs[0].manifest.mode
            )));
        }
        named.push((run.manifest.variant.clone(), confusion(run, dataset)?));
    }
    Ok(ablation_rows(&named))
}

/// A human judge's call on one model-assigned bias type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// File spelling: "right".
    Correct,
    /// File spelling: "wrong".
    Incorrect,
}

impl std::str::FromStr for Verdict {
    type Err = Error;

    fn from_str(value: &str) -> Result<Verdict> {
        match value.trim().to_lowercase().as_str() {
            "right" | "correct" => Ok(Verdict::Correct),
            "wrong" | "incorrect" => Ok(Verdict::Incorrect),
            other => Err(Error::Data(format!(
                "verdict must be \"right\" or \"wrong\", got {other:?}"
            ))),
        }
    }
}

/// Majority vote over an odd number of verdicts.
pub fn silver_label(verdicts: &[Verdict]) -> Result<Verdict> {
    if verdicts.is_empty() || verdicts.len().is_multiple_of(2) {
        return Err(Error::Config(format!(
            "majority voting needs an odd number of verdicts, got {}",
            verdicts.len()
        )));
    }
    let correct = verdicts.iter().filter(|v| **v == Verdict::Correct).count();
    Ok(if correct * 2 > verdicts.len() {
        Verdict::Correct
    } else {
        Verdict::Incorrect
    })
}

/// One annotated sample of the subtype evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeJudgment {
    pub sample_id: String,
    /// The bias type the model assigned to the sampled sentence.
    pub category: BiasType,
    pub verdicts: Vec<Verdict>,
}

impl SubtypeJudgment {
    pub fn silver(&self) -> Result<Verdict> {
        silver_label(&self.verdicts)
    }
}

/// Accuracy for one canonical category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeCategoryRow {
    pub category: BiasType,
    pub correct: usize,
    pub incorrect: usize,
}

impl SubtypeCategoryRow {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect
    }

    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total() as f64
    }
}

/// The subtype evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtypeReport {
    /// Canonical categories with at least one sample, in taxonomy order.
    pub rows: Vec<SubtypeCategoryRow>,
    /// Samples whose model-assigned type lies outside the canonical nine.
    pub violation_count: usize,
    pub violation_correct: usize,
    pub violation_incorrect: usize,
    pub total_correct: usize,
    pub total: usize,
}

impl SubtypeReport {
    pub fn overall_accuracy(&self) -> f64 {
        self.total_correct as f64 / self.total as f64
    }
}

/// Aggregate judged samples into per-category accuracies.
///
/// Samples with a non-canonical category are sub-type violations: they stay
/// in the totals but get no per-category accuracy.
pub fn subtype_accuracy(judgments: &[SubtypeJudgment]) -> Result<SubtypeReport> {
    if judgments.is_empty() {
        return Err(Error::Data("no judgments to aggregate".into()));
    }
    let mut per_category: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut violation_correct = 0usize;
    let mut violation_incorrect = 0usize;
    let mut total_correct = 0usize;

    for judgment in judgments {
        let silver = judgment.silver()?;
        let is_correct = silver == Verdict::Correct;
        if is_correct {
            total_correct += 1;
        }
        match CANONICAL_TYPES.iter().position(|t| *t == judgment.category) {
            Some(index) => {
                let entry = per_category.entry(index).or_insert((0, 0));
                if is_correct {
                    entry.0 += 1;
                } else {
                    entry.1 += 1;
                }
            }
            None => {
                if is_correct {
                    violation_correct += 1;
                } else {
                    violation_incorrect += 1;
                }
            }
        }
    }

    let rows = per_category
        .into_iter()
        .map(|(index, (correct, incorrect))| SubtypeCategoryRow {
            category: CANONICAL_TYPES[index].clone(),
            correct,
            incorrect,
        })
        .collect();

    Ok(SubtypeReport {
        rows,
        violation_count: violation_correct + violation_incorrect,
        violation_correct,
        violation_incorrect,
        total_correct,
        total: judgments.len(),
    })
}

/// Read a judgment file: header `sample_id,category,judge1,...,judgeK`,
/// verdict values `right|wrong`. Extra columns are ignored, so annotated
/// sample sheets read back directly.
pub fn read_judgments(path: &Path, judges: usize) -> Result<Vec<SubtypeJudgment>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("judgment header: {e}")))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("judgment file lacks column {name:?}")))
    };
    let sample_idx = column("sample_id")?;
    let category_idx = column("category")?;
    let judge_idx: Vec<usize> = (1..=judges)
        .map(|i| column(&format!("judge{i}")))
        .collect::<Result<_>>()?;

    let mut judgments = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("judgment row {}: {e}", row + 1)))?;
        let sample_id = record.get(sample_idx).unwrap_or_default().trim().to_string();
        let category_label = record.get(category_idx).unwrap_or_default();
        let category = parse_bias_type(category_label)
            .map_err(|e| Error::Data(format!("judgment row {}: {e}", row + 1)))?;
        let mut verdicts = Vec::with_capacity(judges);
        for (judge, idx) in judge_idx.iter().enumerate() {
            let value = record.get(*idx).unwrap_or_default();
            let verdict = value.parse::<Verdict>().map_err(|_| {
                Error::Data(format!(
                    "judgment row {} judge{}: verdict must be \"right\" or \"wrong\", got {value:?}",
                    row + 1,
                    judge + 1
                ))
            })?;
            verdicts.push(verdict);
        }
        judgments.push(SubtypeJudgment {
            sample_id,
            category,
            verdicts,
        });
    }
    Ok(judgments)
}

/// Share of each bias type over a run's aligned findings (post filter and
/// threshold). Invented categories appear verbatim; percentages sum to 100
/// up to rounding.
pub fn type_distribution(run: &DetectionRun) -> Result<Vec<(String, usize, f64)>> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for aligned in run.aligned_findings() {
        *counts
            .entry(aligned.finding.bias_type.display_name().to_string())
            .or_insert(0) += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Data("run has no aligned findings".into()));
    }
    let mut rows: Vec<(String, usize, f64)> = counts
        .into_iter()
        .map(|(label, count)| {
            let share = 100.0 * count as f64 / total as f64;
            (label, count, share)
        })
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(rows)
}
