//! Loading and preparation of MBIC-style labeled sentence corpora.
//!
//! A dataset is an ordered list of sentences with binary-plus-undecided gold
//! labels. Loading never permutes rows; cleaning drops undecided rows while
//! preserving ids, so every downstream record can refer back to the original
//! file position.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::pipeline::EvaluationMode;
use crate::types::GoldLabel;

/// One labeled statement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    /// 0-based load order, stable across cleaning and preparation.
    pub id: usize,
    /// Statement text, guaranteed free of line breaks.
    pub text: String,
    pub gold: GoldLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outlet: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
}

/// Where a dataset came from, pinned by content hash so run records are tied
/// to exact bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: String,
    pub sha256: String,
}

impl Provenance {
    pub fn synthetic(tag: &str) -> Self {
        Provenance {
            path: format!("synthetic:{tag}"),
            sha256: hex::encode(Sha256::digest(tag.as_bytes())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub sentences: Vec<Sentence>,
    pub provenance: Provenance,
    pub cleaned: bool,
    /// Non-fatal issues observed while loading (line breaks replaced, ...).
    #[serde(default)]
    pub load_warnings: Vec<String>,
}

/// Per-label sentence counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub biased: usize,
    pub non_biased: usize,
    pub undecided: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.biased + self.non_biased + self.undecided
    }
}

/// Names the columns and label spellings of the input file.
///
/// The defaults match the distributed MBIC export; the actual file must be
/// checked and any deviation supplied via configuration, which then lands in
/// the run manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub text_column: String,
    pub label_column: String,
    pub outlet_column: Option<String>,
    pub topic_column: Option<String>,
    pub biased_label: String,
    pub non_biased_label: String,
    pub undecided_label: String,
    /// Field delimiter, default comma.
    pub delimiter: char,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            text_column: "text".into(),
            label_column: "label_bias".into(),
            outlet_column: Some("outlet".into()),
            topic_column: Some("topic".into()),
            biased_label: "Biased".into(),
            non_biased_label: "Non-biased".into(),
            undecided_label: "No agreement".into(),
            delimiter: ',',
        }
    }
}

fn strip_line_breaks(text: &str) -> (String, bool) {
    if !text.contains(['\n', '\r']) {
        return (text.to_string(), false);
    }
    let replaced: String = text
        .replace("\r\n", "\n")
        .replace('\r', "\n")
        .split('\n')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    (replaced, true)
}

impl Dataset {
    /// Load a delimiter-separated UTF-8 file into a dataset.
    ///
    /// One sentence per data row, ids sequential in file order. Internal line
    /// breaks are replaced by single spaces and recorded as warnings. An
    /// unmappable label value aborts the load, naming the 1-based data row.
    pub fn load(path: &Path, columns: &ColumnMap) -> Result<Dataset> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        let sha256 = hex::encode(Sha256::digest(&bytes));

        let mut reader = csv::ReaderBuilder::new()
            .delimiter(columns.delimiter as u8)
            .flexible(false)
            .from_reader(bytes.as_slice());

        let headers = reader
            .headers()
            .map_err(|e| Error::Data(format!("cannot read header of {}: {e}", path.display())))?
            .clone();
        let index_of = |name: &str| -> Option<usize> { headers.iter().position(|h| h == name) };
        let text_idx = index_of(&columns.text_column).ok_or_else(|| {
            Error::Config(format!(
                "missing column {:?} (found: {})",
                columns.text_column,
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let label_idx = index_of(&columns.label_column).ok_or_else(|| {
            Error::Config(format!(
                "missing column {:?} (found: {})",
                columns.label_column,
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let outlet_idx = match &columns.outlet_column {
            Some(name) => index_of(name),
            None => None,
        };
        let topic_idx = match &columns.topic_column {
            Some(name) => index_of(name),
            None => None,
        };

        let mut sentences = Vec::new();
        let mut warnings = Vec::new();
        for (row_number, record) in reader.records().enumerate() {
            let record = record.map_err(|e| {
                Error::Data(format!("row {}: malformed record: {e}", row_number + 1))
            })?;
            let raw_text = record.get(text_idx).unwrap_or_default();
            let (text, had_breaks) = strip_line_breaks(raw_text);
            if had_breaks {
                warnings.push(format!(
                    "row {}: replaced internal line breaks with spaces",
                    row_number + 1
                ));
            }
            let raw_label = record.get(label_idx).unwrap_or_default().trim();
            let gold = if raw_label == columns.biased_label {
                GoldLabel::Biased
            } else if raw_label == columns.non_biased_label {
                GoldLabel::NonBiased
            } else if raw_label == columns.undecided_label {
                GoldLabel::Undecided
            } else {
                return Err(Error::Data(format!(
                    "row {}: unmappable label value {raw_label:?} (expected {:?}, {:?} or {:?})",
                    row_number + 1,
                    columns.biased_label,
                    columns.non_biased_label,
                    columns.undecided_label
                )));
            };
            let grab = |idx: Option<usize>| {
                idx.and_then(|i| record.get(i))
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
            };
            sentences.push(Sentence {
                id: row_number,
                text,
                gold,
                outlet: grab(outlet_idx),
                topic: grab(topic_idx),
            });
        }

        for w in &warnings {
            log::warn!("{}: {w}", path.display());
        }

        let cleaned = sentences.iter().all(|s| s.gold != GoldLabel::Undecided);
        Ok(Dataset {
            sentences,
            provenance: Provenance {
                path: path.display().to_string(),
                sha256,
            },
            cleaned,
            load_warnings: warnings,
        })
    }

    /// Build a dataset directly from sentences (fixtures, remainders).
    /// Text must already be free of line breaks and ids unique.
    pub fn from_sentences(sentences: Vec<Sentence>, provenance: Provenance) -> Result<Dataset> {
        let mut seen = std::collections::HashSet::new();
        for s in &sentences {
            if s.text.contains(['\n', '\r']) {
                return Err(Error::Data(format!("sentence {} contains line breaks", s.id)));
            }
            if !seen.insert(s.id) {
                return Err(Error::Data(format!("duplicate sentence id {}", s.id)));
            }
        }
        let cleaned = sentences.iter().all(|s| s.gold != GoldLabel::Undecided);
        Ok(Dataset {
            sentences,
            provenance,
            cleaned,
            load_warnings: Vec::new(),
        })
    }

    /// Remove every sentence the annotators could not decide on. Order and
    /// ids of survivors are preserved. Idempotent.
    pub fn clean(&self) -> Dataset {
        let sentences: Vec<Sentence> = self
            .sentences
            .iter()
            .filter(|s| s.gold != GoldLabel::Undecided)
            .cloned()
            .collect();
        Dataset {
            sentences,
            provenance: self.provenance.clone(),
            cleaned: true,
            load_warnings: self.load_warnings.clone(),
        }
    }

    /// Prepare a cleaned dataset for an evaluation mode.
    ///
    /// In block mode the minimal suffix is dropped until the sentence count
    /// divides the block size; individual mode leaves the dataset unchanged.
    pub fn prepare_for_mode(&self, mode: &EvaluationMode) -> Result<Dataset> {
        if !self.cleaned {
            return Err(Error::Data(
                "dataset must be cleaned before preparing for a mode".into(),
            ));
        }
        match mode {
            EvaluationMode::Individual => Ok(self.clone()),
            EvaluationMode::Blocks { size } => {
                if *size == 0 {
                    return Err(Error::Config("block size must be at least 1".into()));
                }
                let keep = self.sentences.len() - self.sentences.len() % size;
                let mut out = self.clone();
                out.sentences.truncate(keep);
                Ok(out)
            }
        }
    }

    /// Per-label counts. Always sums to the dataset size.
    pub fn stats(&self) -> LabelCounts {
        let mut counts = LabelCounts {
            biased: 0,
            non_biased: 0,
            undecided: 0,
        };
        for s in &self.sentences {
            match s.gold {
                GoldLabel::Biased => counts.biased += 1,
                GoldLabel::NonBiased => counts.non_biased += 1,
                GoldLabel::Undecided => counts.undecided += 1,
            }
        }
        counts
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// id -> gold lookup for scoring.
    pub fn gold_by_id(&self) -> HashMap<usize, GoldLabel> {
        self.sentences.iter().map(|s| (s.id, s.gold)).collect()
    }

    /// Write the dataset back out in the same shape `load` reads, so
    /// derived datasets (remainders, subsets) can be re-ingested.
    pub fn write_csv(&self, path: &Path, columns: &ColumnMap) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut writer = csv::WriterBuilder::new()
            .delimiter(columns.delimiter as u8)
            .from_path(path)
            .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))?;
        let mut header = vec![columns.text_column.as_str()];
        if let Some(outlet) = &columns.outlet_column {
            header.push(outlet.as_str());
        }
        if let Some(topic) = &columns.topic_column {
            header.push(topic.as_str());
        }
        header.push(columns.label_column.as_str());
        writer
            .write_record(&header)
            .map_err(|e| Error::Data(e.to_string()))?;
        for s in &self.sentences {
            let label = match s.gold {
                GoldLabel::Biased => &columns.biased_label,
                GoldLabel::NonBiased => &columns.non_biased_label,
                GoldLabel::Undecided => &columns.undecided_label,
            };
            let mut record = vec![s.text.as_str()];
            if columns.outlet_column.is_some() {
                record.push(s.outlet.as_deref().unwrap_or(""));
            }
            if columns.topic_column.is_some() {
                record.push(s.topic.as_deref().unwrap_or(""));
            }
            record.push(label);
            writer
                .write_record(&record)
                .map_err(|e| Error::Data(e.to_string()))?;
        }
        writer.flush()?;
        Ok(())
    }
}
