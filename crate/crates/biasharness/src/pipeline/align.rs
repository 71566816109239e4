//! Matching model findings back to the sentences of their input unit.
//!
//! Models quote sentences imperfectly and sometimes invent new ones. The
//! matcher tries progressively looser criteria: exact text equality,
//! normalized equality, containment, then bounded edit similarity. Anything
//! that still fails is a hallucination and lands in the unmatched list.

use serde::{Deserialize, Serialize};

use crate::types::BiasFinding;

/// Tunables for the two loosest rungs of the ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Minimum share of the longer string a containment match must cover.
    pub containment_ratio: f64,
    /// Minimum normalized edit similarity for a fuzzy match.
    pub fuzzy_threshold: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            containment_ratio: 0.6,
            fuzzy_threshold: 0.9,
        }
    }
}

/// A finding attributed to a specific dataset sentence, with the ladder rung
/// that matched it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedFinding {
    pub sentence_id: usize,
    pub finding: BiasFinding,
    pub matched_by: MatchKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    Normalized,
    Containment,
    Fuzzy,
}

/// Trim, collapse whitespace, case-fold, normalize quotes and dashes.
pub fn normalize_for_match(text: &str) -> String {
    let mapped: String = text
        .chars()
        .map(|c| match c {
            '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{2032}' => '\'',
            '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{2033}' => '"',
            '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}' => '-',
            '\u{00A0}' => ' ',
            other => other,
        })
        .collect();
    mapped
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut previous: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitution = previous[j] + usize::from(ca != cb);
            current[j + 1] = substitution
                .min(previous[j + 1] + 1)
                .min(current[j] + 1);
        }
        std::mem::swap(&mut previous, &mut current);
    }
    previous[b.len()]
}

/// Normalized edit similarity in `[0,1]` over normalized strings.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&a, &b) as f64 / longest as f64
}

fn containment_matches(finding: &str, sentence: &str, ratio: f64) -> bool {
    let (longer, shorter) = if finding.chars().count() >= sentence.chars().count() {
        (finding, sentence)
    } else {
        (sentence, finding)
    };
    if shorter.is_empty() || !longer.contains(shorter) {
        return false;
    }
    shorter.chars().count() as f64 >= ratio * longer.chars().count() as f64
}

/// Match findings against the sentences of one unit.
///
/// Each finding matches at most one sentence; rungs are tried strictly in
/// order and within a rung sentences are scanned in unit order (the fuzzy
/// rung picks the most similar sentence). The result is a partition of the
/// input: every finding ends up aligned or unmatched.
pub fn align_findings(
    findings: &[BiasFinding],
    sentences: &[(usize, &str)],
    config: &AlignConfig,
) -> (Vec<AlignedFinding>, Vec<BiasFinding>) {
    let normalized_sentences: Vec<(usize, String)> = sentences
        .iter()
        .map(|(id, text)| (*id, normalize_for_match(text)))
        .collect();

    let mut aligned = Vec::new();
    let mut unmatched = Vec::new();

    for finding in findings {
        let target = finding.sentence_text.as_str();
        let normalized_target = normalize_for_match(target);

        let hit = sentences
            .iter()
            .find(|(_, text)| *text == target)
            .map(|(id, _)| (*id, MatchKind::Exact))
            .or_else(|| {
                normalized_sentences
                    .iter()
                    .find(|(_, text)| *text == normalized_target)
                    .map(|(id, _)| (*id, MatchKind::Normalized))
            })
            .or_else(|| {
                normalized_sentences
                    .iter()
                    .find(|(_, text)| {
                        containment_matches(&normalized_target, text, config.containment_ratio)
                    })
                    .map(|(id, _)| (*id, MatchKind::Containment))
            })
            .or_else(|| {
                // most similar sentence wins; ties go to the earliest
                let mut best: Option<(usize, f64)> = None;
                for (id, text) in &normalized_sentences {
                    let similarity = edit_similarity(&normalized_target, text);
                    if similarity >= config.fuzzy_threshold
                        && best.is_none_or(|(_, s)| similarity > s)
                    {
                        best = Some((*id, similarity));
                    }
                }
                best.map(|(id, _)| (id, MatchKind::Fuzzy))
            });

        match hit {
            Some((sentence_id, matched_by)) => aligned.push(AlignedFinding {
                sentence_id,
                finding: finding.clone(),
                matched_by,
            }),
            None => unmatched.push(finding.clone()),
        }
    }

    (aligned, unmatched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BiasType;

    fn finding(text: &str) -> BiasFinding {
        BiasFinding {
            sentence_text: text.to_string(),
            bias_type: BiasType::Political,
            bias_score: 0.8,
            description: String::new(),
        }
    }

    fn config() -> AlignConfig {
        AlignConfig::default()
    }

    #[test]
    fn exact_text_aligns() {
        let sentences = [(3usize, "The vote passed."), (4, "Critics fumed.")];
        let (aligned, unmatched) =
            align_findings(&[finding("Critics fumed.")], &sentences, &config());
        assert_eq!(unmatched.len(), 0);
        assert_eq!(aligned[0].sentence_id, 4);
        assert_eq!(aligned[0].matched_by, MatchKind::Exact);
    }

    #[test]
    fn absent_text_is_unmatched() {
        let sentences = [(0usize, "The vote passed.")];
        let (aligned, unmatched) =
            align_findings(&[finding("Entirely invented sentence about dogs.")], &sentences, &config());
        assert!(aligned.is_empty());
        assert_eq!(unmatched.len(), 1);
    }

    #[test]
    fn curly_quotes_align_via_normalization() {
        let sentences = [(7usize, "He said \u{201C}no\u{201D} loudly.")];
        let (aligned, _) = align_findings(&[finding("He said \"no\" loudly.")], &sentences, &config());
        assert_eq!(aligned.len(), 1);
        assert_eq!(aligned[0].matched_by, MatchKind::Normalized);
    }

    #[test]
    fn prefix_quote_aligns_by_containment() {
        let sentences =
            [(1usize, "The mayor denounced the plan as reckless and expensive for the city.")];
        let (aligned, _) = align_findings(
            &[finding("The mayor denounced the plan as reckless and expensive")],
            &sentences,
            &config(),
        );
        assert_eq!(aligned.len(), 1);
        assert_eq!(aligned[0].matched_by, MatchKind::Containment);
    }

    #[test]
    fn short_containment_is_rejected() {
        let sentences = [(1usize, "The mayor denounced the plan as reckless and expensive for the city.")];
        let (aligned, unmatched) = align_findings(&[finding("the plan")], &sentences, &config());
        assert!(aligned.is_empty());
        assert_eq!(unmatched.len(), 1);
    }

    #[test]
    fn near_miss_aligns_fuzzily() {
        let sentences = [(2usize, "Senators quarrelled over the budget for hours.")];
        let (aligned, _) = align_findings(
            &[finding("Senators quarreled over the budget for hours.")],
            &sentences,
            &config(),
        );
        assert_eq!(aligned.len(), 1);
        assert_eq!(aligned[0].matched_by, MatchKind::Fuzzy);
    }

    #[test]
    fn alignment_partitions_input() {
        let sentences = [(0usize, "Alpha."), (1, "Beta.")];
        let findings = vec![finding("Alpha."), finding("Gamma."), finding("Beta.")];
        let (aligned, unmatched) = align_findings(&findings, &sentences, &config());
        assert_eq!(aligned.len() + unmatched.len(), findings.len());
    }

    #[test]
    fn edit_similarity_bounds() {
        assert_eq!(edit_similarity("abc", "abc"), 1.0);
        assert_eq!(edit_similarity("", ""), 1.0);
        assert!(edit_similarity("abc", "xyz") <= 0.0 + f64::EPSILON);
    }
}
