//! Robust extraction of finding arrays from raw model output.
//!
//! Strict parse first, so well-formed output is never altered. On failure an
//! ordered sequence of repair passes runs, each recorded by name, making
//! every repaired outcome auditable.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::types::RawFinding;

/// Result of parsing one completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ParseOutcome {
    /// Strict parse succeeded; the output was used untouched.
    Parsed { findings: Vec<RawFinding> },
    /// One or more repair passes were needed; they are listed in the order
    /// applied.
    Repaired {
        findings: Vec<RawFinding>,
        repairs: Vec<String>,
    },
    /// Nothing recoverable. Failed units contribute no flagged sentences but
    /// are counted and reported.
    Failed { reason: String, raw: String },
}

impl ParseOutcome {
    pub fn findings(&self) -> &[RawFinding] {
        match self {
            ParseOutcome::Parsed { findings } | ParseOutcome::Repaired { findings, .. } => findings,
            ParseOutcome::Failed { .. } => &[],
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, ParseOutcome::Failed { .. })
    }
}

fn string_of(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn number_of(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn field<'v>(object: &'v serde_json::Map<String, Value>, names: &[&str]) -> Option<&'v Value> {
    for name in names {
        if let Some(v) = object.get(*name) {
            return Some(v);
        }
    }
    // tolerate case and spacing variations in keys
    for (key, v) in object {
        let folded = key.trim().to_lowercase().replace([' ', '-'], "_");
        if names.contains(&folded.as_str()) {
            return Some(v);
        }
    }
    None
}

fn finding_from_value(value: &Value) -> Option<RawFinding> {
    let object = value.as_object()?;
    let sentence = field(object, &["sentence", "sentence_text", "text"]).and_then(string_of);
    let bias_type = field(object, &["bias_type", "type", "bias"]).and_then(string_of);
    let bias_score = field(object, &["bias_score", "score"]).and_then(number_of);
    let description =
        field(object, &["bias_description", "description", "explanation"]).and_then(string_of);
    if sentence.is_none() && bias_type.is_none() && bias_score.is_none() && description.is_none() {
        return None;
    }
    Some(RawFinding {
        sentence_text: sentence,
        bias_type,
        bias_score,
        description,
    })
}

/// Interpret a JSON value as a finding list: an array of finding objects, a
/// single finding object, or an object wrapping such an array.
fn findings_from_json(value: &Value) -> Option<Vec<RawFinding>> {
    match value {
        Value::Array(items) => {
            let mut findings = Vec::with_capacity(items.len());
            for item in items {
                findings.push(finding_from_value(item)?);
            }
            Some(findings)
        }
        Value::Object(object) => {
            // common wrapper: {"findings": [...]} or similar single-key array
            for key in ["findings", "results", "biased_sentences"] {
                if let Some(inner) = object.get(key) {
                    if inner.is_array() {
                        return findings_from_json(inner);
                    }
                }
            }
            finding_from_value(value).map(|f| vec![f])
        }
        _ => None,
    }
}

fn try_parse(text: &str) -> Option<Vec<RawFinding>> {
    let value: Value = serde_json::from_str(text).ok()?;
    findings_from_json(&value)
}

/// Take the content of the first fenced code block, if any.
fn strip_code_fences(text: &str) -> Option<String> {
    let start = text.find("```")?;
    let after = &text[start + 3..];
    // skip a language tag on the fence line
    let content_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let content = &after[content_start..];
    let end = content.find("```").unwrap_or(content.len());
    let inner = content[..end].trim();
    if inner.is_empty() {
        None
    } else {
        Some(inner.to_string())
    }
}

/// All balanced top-level `open...close` regions in order of appearance.
/// Respects JSON string syntax.
fn balanced_regions(text: &str, open: char, close: char) -> Vec<&str> {
    let mut regions = Vec::new();
    let mut search_from = 0usize;
    while let Some(offset) = text[search_from..].find(open) {
        let start = search_from + offset;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (i, c) in text[start..].char_indices() {
            if in_string {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == '"' {
                    in_string = false;
                }
                continue;
            }
            match c {
                '"' => in_string = true,
                c if c == open => depth += 1,
                c if c == close => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        end = Some(start + i + c.len_utf8());
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(end) => {
                regions.push(&text[start..end]);
                search_from = end;
            }
            None => break,
        }
    }
    regions
}

/// Extract a bracketed region out of surrounding prose: prefer the first
/// balanced `[...]` (then `{...}`) that already parses as findings, falling
/// back to the first region at all so later passes can keep repairing it.
fn extract_bracket_region(text: &str) -> Option<String> {
    let mut candidates: Vec<&str> = balanced_regions(text, '[', ']');
    candidates.extend(balanced_regions(text, '{', '}'));
    candidates.retain(|region| *region != text.trim());
    if let Some(parsing) = candidates.iter().find(|region| try_parse(region).is_some()) {
        return Some(parsing.to_string());
    }
    candidates.first().map(|region| region.to_string())
}

/// Remove commas that directly precede a closing bracket or brace, outside
/// strings.
fn remove_trailing_commas(text: &str) -> Option<String> {
    let mut out = String::with_capacity(text.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut changed = false;
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        if c == '"' {
            in_string = true;
            out.push(c);
            continue;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|n| !n.is_whitespace());
            if matches!(next, Some(']') | Some('}')) {
                changed = true;
                continue;
            }
        }
        out.push(c);
    }
    changed.then_some(out)
}

/// Close an unterminated string and any open brackets at end of input.
fn balance_brackets(text: &str) -> Option<String> {
    let mut stack: Vec<char> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for c in text.chars() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '[' => stack.push(']'),
            '{' => stack.push('}'),
            ']' | '}' if stack.last() == Some(&c) => {
                stack.pop();
            }
            _ => {}
        }
    }
    if !in_string && stack.is_empty() {
        return None;
    }
    let mut out = text.trim_end().to_string();
    // a dangling comma or colon before the forced closers is never valid
    while out.ends_with(',') || out.ends_with(':') {
        out.pop();
    }
    if in_string {
        out.push('"');
    }
    while let Some(closer) = stack.pop() {
        out.push(closer);
    }
    Some(out)
}

fn normalize_smart_quotes(text: &str) -> Option<String> {
    if !text.chars().any(|c| matches!(c, '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}')) {
        return None;
    }
    Some(
        text.chars()
            .map(|c| match c {
                '\u{2018}' | '\u{2019}' => '\'',
                '\u{201C}' | '\u{201D}' => '"',
                other => other,
            })
            .collect(),
    )
}

/// Parse a completion into findings, repairing common model formatting
/// mistakes when strict parsing fails. Failure is a value, never a panic.
pub fn parse_findings(raw: &str) -> ParseOutcome {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return ParseOutcome::Failed {
            reason: "empty completion".into(),
            raw: raw.to_string(),
        };
    }
    if let Some(findings) = try_parse(trimmed) {
        return ParseOutcome::Parsed { findings };
    }

    type Pass = (&'static str, fn(&str) -> Option<String>);
    const PASSES: [Pass; 5] = [
        ("strip_code_fences", strip_code_fences),
        ("extract_bracket_region", extract_bracket_region),
        ("remove_trailing_commas", remove_trailing_commas),
        ("balance_brackets", balance_brackets),
        ("normalize_smart_quotes", normalize_smart_quotes),
    ];

    let mut text = trimmed.to_string();
    let mut repairs: Vec<String> = Vec::new();
    for (name, pass) in PASSES {
        let Some(repaired) = pass(&text) else {
            continue;
        };
        if repaired == text {
            continue;
        }
        text = repaired;
        repairs.push(name.to_string());
        if let Some(findings) = try_parse(&text) {
            return ParseOutcome::Repaired { findings, repairs };
        }
    }

    let reason = match serde_json::from_str::<Value>(&text) {
        Ok(_) => "JSON is not a finding array".to_string(),
        Err(e) => format!("unrecoverable JSON: {e}"),
    };
    ParseOutcome::Failed {
        reason,
        raw: raw.to_string(),
    }
}
