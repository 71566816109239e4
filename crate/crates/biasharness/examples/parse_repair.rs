//! What the output parser does with the messy JSON models actually return.
//!
//! ```bash
//! cargo run --example parse_repair
//! ```

use biasharness::{parse_findings, ParseOutcome};

fn main() {
    let samples: [(&str, &str); 6] = [
        (
            "well-formed",
            r#"[{"sentence": "The mayor lied.", "bias_type": "political bias", "bias_score": 0.9, "bias_description": "direct accusation"}]"#,
        ),
        (
            "fenced with prose",
            "Here is my analysis:\n```json\n[{\"sentence\": \"The mayor lied.\", \"bias_type\": \"political bias\", \"bias_score\": 0.9, \"bias_description\": \"accusation\"}]\n```\nHope that helps!",
        ),
        (
            "trailing commas",
            r#"[{"sentence": "The mayor lied.", "bias_type": "bias", "bias_score": 0.7,},]"#,
        ),
        (
            "truncated mid-string",
            r#"[{"sentence": "The mayor lied.", "bias_type": "bias", "bias_score": 0.7, "bias_description": "cut off right he"#,
        ),
        (
            "smart quotes",
            "[{\u{201C}sentence\u{201D}: \u{201C}The mayor lied.\u{201D}, \u{201C}bias_type\u{201D}: \u{201C}bias\u{201D}, \u{201C}bias_score\u{201D}: 0.4}]",
        ),
        ("irrecoverable", "{sentence: "),
    ];

    for (label, raw) in samples {
        println!("== {label}");
        match parse_findings(raw) {
            ParseOutcome::Parsed { findings } => {
                println!("   parsed strictly: {} finding(s)", findings.len());
            }
            ParseOutcome::Repaired { findings, repairs } => {
                println!(
                    "   repaired via [{}]: {} finding(s)",
                    repairs.join(", "),
                    findings.len()
                );
            }
            ParseOutcome::Failed { reason, .. } => {
                println!("   failed: {reason}");
            }
        }
    }
}
