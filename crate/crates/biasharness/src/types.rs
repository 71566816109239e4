//! Bias taxonomy and finding records shared by every other module.
//!
//! The taxonomy is a closed set of nine canonical categories. Model output
//! that names anything else is preserved verbatim as [`BiasType::Other`] so
//! distribution reports can show invented categories without merging them.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine canonical bias categories, plus `None` for explicit non-bias
/// findings and `Other` for model-invented labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum BiasType {
    Linguistic,
    TextLevelContext,
    ReportingLevelContext,
    Cognitive,
    HateSpeech,
    FakeNews,
    Racial,
    Gender,
    Political,
    /// Explicit "no bias" marker emitted by some models.
    None,
    /// Any label outside the canonical set, trimmed and lowercased.
    Other(String),
}

/// The nine canonical categories in declaration order.
pub const CANONICAL_TYPES: [BiasType; 9] = [
    BiasType::Linguistic,
    BiasType::TextLevelContext,
    BiasType::ReportingLevelContext,
    BiasType::Cognitive,
    BiasType::HateSpeech,
    BiasType::FakeNews,
    BiasType::Racial,
    BiasType::Gender,
    BiasType::Political,
];

impl BiasType {
    /// Canonical display name, used bit-exact in reports and fine-tune files.
    pub fn display_name(&self) -> &str {
        match self {
            BiasType::Linguistic => "linguistic bias",
            BiasType::TextLevelContext => "text-level context bias",
            BiasType::ReportingLevelContext => "reporting-level context bias",
            BiasType::Cognitive => "cognitive bias",
            BiasType::HateSpeech => "hate speech",
            BiasType::FakeNews => "fake news",
            BiasType::Racial => "racial bias",
            BiasType::Gender => "gender bias",
            BiasType::Political => "political bias",
            BiasType::None => "none",
            BiasType::Other(label) => label,
        }
    }

    /// Short identifier used for template file names (display name minus the
    /// " bias" suffix, hyphenated).
    pub fn slug(&self) -> Option<&'static str> {
        match self {
            BiasType::Linguistic => Some("linguistic"),
            BiasType::TextLevelContext => Some("text-level-context"),
            BiasType::ReportingLevelContext => Some("reporting-level-context"),
            BiasType::Cognitive => Some("cognitive"),
            BiasType::HateSpeech => Some("hate-speech"),
            BiasType::FakeNews => Some("fake-news"),
            BiasType::Racial => Some("racial"),
            BiasType::Gender => Some("gender"),
            BiasType::Political => Some("political"),
            BiasType::None | BiasType::Other(_) => Option::None,
        }
    }

    /// True for the nine members of the closed canonical set.
    pub fn is_canonical(&self) -> bool {
        !matches!(self, BiasType::None | BiasType::Other(_))
    }
}

impl fmt::Display for BiasType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Gold annotation attached to a dataset sentence. `Undecided` only exists
/// before cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldLabel {
    Biased,
    NonBiased,
    Undecided,
}

/// A validated model assertion that a sentence exhibits bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFinding {
    pub sentence_text: String,
    pub bias_type: BiasType,
    /// Strength score in `[0,1]`. Out-of-range raw values are clamped during
    /// validation, never rejected.
    pub bias_score: f64,
    pub description: String,
}

/// An unvalidated finding as extracted from raw model output. Every field is
/// optional; validation decides what is usable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawFinding {
    pub sentence_text: Option<String>,
    pub bias_type: Option<String>,
    pub bias_score: Option<f64>,
    pub description: Option<String>,
}

/// Wire form of a finding, exactly as models are asked to emit it and as
/// fine-tune targets are written. Field names are part of the output
/// contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingOut {
    pub sentence: String,
    pub bias_type: String,
    pub bias_score: f64,
    pub bias_description: String,
}

impl From<&BiasFinding> for FindingOut {
    fn from(f: &BiasFinding) -> Self {
        FindingOut {
            sentence: f.sentence_text.clone(),
            bias_type: f.bias_type.display_name().to_string(),
            bias_score: f.bias_score,
            bias_description: f.description.clone(),
        }
    }
}

/// Canonical serialization of a finding array: pretty-printed JSON, the
/// exact shape embedded in prompts and fine-tune targets.
pub fn findings_to_canonical_json(findings: &[FindingOut]) -> String {
    serde_json::to_string_pretty(findings).expect("findings always serialize")
}

/// Normalization applied before trying to match a label against the
/// canonical names: trim, lowercase, collapse internal whitespace.
pub fn normalize_label(label: &str) -> String {
    label
        .trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Looser form used only for canonical/alias lookup: hyphens and underscores
/// count as spaces so "text level context bias" still matches.
fn fold_label(normalized: &str) -> String {
    let folded: String = normalized
        .chars()
        .map(|c| if c == '-' || c == '_' { ' ' } else { c })
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Maps free-text labels to canonical categories. The default table carries
/// a single entry ("sexism" -> gender bias); researchers extend it from
/// configuration rather than code.
#[derive(Debug, Clone)]
pub struct AliasTable {
    aliases: HashMap<String, BiasType>,
}

impl Default for AliasTable {
    fn default() -> Self {
        let mut t = AliasTable {
            aliases: HashMap::new(),
        };
        t.register("sexism", BiasType::Gender);
        t
    }
}

impl AliasTable {
    pub fn empty() -> Self {
        AliasTable {
            aliases: HashMap::new(),
        }
    }

    /// Register an alias. The key is stored in folded form, so lookups are
    /// insensitive to case, extra whitespace and hyphenation.
    pub fn register(&mut self, alias: &str, target: BiasType) {
        self.aliases
            .insert(fold_label(&normalize_label(alias)), target);
    }

    /// Load `{"alias": "canonical display name", ...}` from a JSON file.
    pub fn from_json_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let map: HashMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("alias table {}: {e}", path.display())))?;
        let mut table = AliasTable::default();
        for (alias, target) in map {
            let parsed = parse_bias_type(&target)?;
            if !parsed.is_canonical() && parsed != BiasType::None {
                return Err(Error::Config(format!(
                    "alias table {}: target {target:?} is not a canonical category",
                    path.display()
                )));
            }
            table.register(&alias, parsed);
        }
        Ok(table)
    }

    fn lookup(&self, folded: &str) -> Option<&BiasType> {
        self.aliases.get(folded)
    }
}

fn canonical_lookup(folded: &str) -> Option<BiasType> {
    // Both the full display name and the name minus its " bias" suffix match.
    for t in CANONICAL_TYPES {
        let name = fold_label(&normalize_label(t.display_name()));
        if folded == name {
            return Some(t);
        }
        if let Some(stem) = name.strip_suffix(" bias") {
            if folded == stem {
                return Some(t);
            }
        }
    }
    None
}

/// Parse a free-text bias label into the taxonomy using the default alias
/// table.
pub fn parse_bias_type(label: &str) -> Result<BiasType> {
    parse_bias_type_with(label, &AliasTable::default())
}

/// Parse a free-text bias label into the taxonomy.
///
/// The literal "none" maps to [`BiasType::None`]; a normalized label that
/// matches a canonical name (with or without its " bias" suffix) or a
/// registered alias maps to that category; everything else becomes
/// [`BiasType::Other`] carrying the normalized label.
pub fn parse_bias_type_with(label: &str, aliases: &AliasTable) -> Result<BiasType> {
    let normalized = normalize_label(label);
    if normalized.is_empty() {
        return Err(Error::Data("empty bias type label".into()));
    }
    if normalized == "none" {
        return Ok(BiasType::None);
    }
    let folded = fold_label(&normalized);
    if let Some(t) = canonical_lookup(&folded) {
        return Ok(t);
    }
    // A trailing " bias" is dropped when the remainder still matches.
    if let Some(stem) = folded.strip_suffix(" bias") {
        if let Some(t) = canonical_lookup(stem) {
            return Ok(t);
        }
        if let Some(t) = aliases.lookup(stem) {
            return Ok(t.clone());
        }
    }
    if let Some(t) = aliases.lookup(&folded) {
        return Ok(t.clone());
    }
    Ok(BiasType::Other(normalized))
}

/// What validation had to touch to make a raw finding usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum ValidationFlag {
    /// bias_score was outside `[0,1]` and has been clamped.
    ScoreClamped { raw: f64 },
    /// bias_score was absent; the neutral default 0.5 was substituted.
    ScoreMissing,
    /// description was absent and replaced by empty text.
    DescriptionMissing,
    /// bias_type was absent; the finding still counts as a bias assertion.
    TypeMissing,
}

/// A finding that passed validation, together with everything validation had
/// to fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedFinding {
    pub finding: BiasFinding,
    pub flags: Vec<ValidationFlag>,
}

/// Validate one raw finding.
///
/// Scores are clamped into `[0,1]`, a missing description becomes empty text
/// and a missing score defaults to 0.5; each repair is flagged. A missing or
/// empty sentence text rejects the finding with a reason.
pub fn validate_finding(
    raw: &RawFinding,
    aliases: &AliasTable,
) -> std::result::Result<ValidatedFinding, String> {
    let sentence_text = match &raw.sentence_text {
        Some(t) if !t.trim().is_empty() => t.clone(),
        Some(_) => return Err("empty sentence text".into()),
        Option::None => return Err("missing sentence text".into()),
    };

    let mut flags = Vec::new();

    let bias_type = match &raw.bias_type {
        Some(label) if !normalize_label(label).is_empty() => {
            parse_bias_type_with(label, aliases).expect("non-empty label always parses")
        }
        _ => {
            flags.push(ValidationFlag::TypeMissing);
            BiasType::Other("unspecified".into())
        }
    };

    let bias_score = match raw.bias_score {
        Some(s) if (0.0..=1.0).contains(&s) => s,
        Some(s) => {
            flags.push(ValidationFlag::ScoreClamped { raw: s });
            s.clamp(0.0, 1.0)
        }
        Option::None => {
            flags.push(ValidationFlag::ScoreMissing);
            0.5
        }
    };

    let description = match &raw.description {
        Some(d) => d.clone(),
        Option::None => {
            flags.push(ValidationFlag::DescriptionMissing);
            String::new()
        }
    };

    Ok(ValidatedFinding {
        finding: BiasFinding {
            sentence_text,
            bias_type,
            bias_score,
            description,
        },
        flags,
    })
}
