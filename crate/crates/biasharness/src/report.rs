//! Rendering of result tables as markdown, CSV or JSON, with the loader for
//! reading CSV results back.
//!
//! Numeric display is three decimals, half-up, and the column order is
//! fixed: TP, FP, FN, TN, F1, Recall, Precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{AblationRow, ConfusionMatrix, Metrics, SubtypeReport};

/// Half-up rounding to three decimals, the display convention everywhere.
pub fn round3(value: f64) -> f64 {
    (value * 1000.0).round() / 1000.0
}

/// Fixed three-decimal display form.
pub fn fmt3(value: f64) -> String {
    format!("{:.3}", round3(value))
}

/// Percentage with two decimals, half-up.
pub fn fmt_percent(fraction: f64) -> String {
    format!("{:.2}%", (fraction * 10000.0).round() / 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Config(format!(
                "unknown report format {other:?}; expected markdown, csv or json"
            ))),
        }
    }
}

/// One scored result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub cm: ConfusionMatrix,
    pub metrics: Metrics,
}

impl ReportRow {
    pub fn new(name: impl Into<String>, cm: ConfusionMatrix) -> Self {
        ReportRow {
            name: name.into(),
            metrics: crate::evaluation::metrics(&cm),
            cm,
        }
    }
}

const CSV_HEADER: &str = "model,tp,fp,fn,tn,f1,recall,precision";

/// Render result rows in the requested format. Markdown marks degenerate
/// metrics; CSV carries plain numbers and round-trips through
/// [`parse_report_csv`].
pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Model | TP | FP | FN | TN | F1-Score | Recall | Precision |\n");
            out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
            for row in rows {
                let degenerate = if row.metrics.degenerate { " (degenerate)" } else { "" };
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {}{} |\n",
                    row.name,
                    row.cm.true_positives,
                    row.cm.false_positives,
                    row.cm.false_negatives,
                    row.cm.true_negatives,
                    fmt3(row.metrics.f1),
                    fmt3(row.metrics.recall),
                    fmt3(row.metrics.precision),
                    degenerate
                ));
            }
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for row in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    csv_quote(&row.name),
                    row.cm.true_positives,
                    row.cm.false_positives,
                    row.cm.false_negatives,
                    row.cm.true_negatives,
                    fmt3(row.metrics.f1),
                    fmt3(row.metrics.recall),
                    fmt3(row.metrics.precision)
                ));
            }
            out
        }
        ReportFormat::Json => {
            serde_json::to_string_pretty(rows).expect("report rows always serialize")
        }
    }
}

fn csv_quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Parse rows back from the CSV form produced by [`render_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("report header: {e}")))?
        .clone();
    let expected: Vec<&str> = CSV_HEADER.split(',').collect();
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(Error::Data(format!(
            "unexpected report header {actual:?}; expected {expected:?}"
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("report row {}: {e}", i + 1)))?;
        let count = |idx: usize| -> Result<usize> {
            record
                .get(idx)
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("report row {}: {e}", i + 1)))
        };
        let real = |idx: usize| -> Result<f64> {
            record
                .get(idx)
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("report row {}: {e}", i + 1)))
        };
        rows.push(ReportRow {
            name: record.get(0).unwrap_or_default().to_string(),
            cm: ConfusionMatrix::new(count(1)?, count(2)?, count(3)?, count(4)?),
            metrics: Metrics {
                f1: real(5)?,
                recall: real(6)?,
                precision: real(7)?,
                degenerate: false,
            },
        });
    }
    Ok(rows)
}

/// Render an ablation comparison. Markdown gets arrows vs the base row and
/// bold best values, like the result tables this harness reproduces.
pub fn render_ablation(rows: &[AblationRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Variant | TP | FP | FN | TN | F1-Score | Recall | Precision |\n");
            out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
            for row in rows {
                let cell = |value: f64, best: bool, direction: Option<crate::evaluation::Direction>| {
                    let mut text = fmt3(value);
                    if best {
                        text = format!("**{text}**");
                    }
                    if let Some(direction) = direction {
                        text.push(' ');
                        text.push_str(direction.marker());
                    }
                    text
                };
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
                    row.name,
                    row.cm.true_positives,
                    row.cm.false_positives,
                    row.cm.false_negatives,
                    row.cm.true_negatives,
                    cell(row.metrics.f1, row.best_f1, row.deltas.map(|d| d.f1)),
                    cell(row.metrics.recall, row.best_recall, row.deltas.map(|d| d.recall)),
                    cell(
                        row.metrics.precision,
                        row.best_precision,
                        row.deltas.map(|d| d.precision)
                    ),
                ));
            }
            out
        }
        ReportFormat::Csv => {
            let plain: Vec<ReportRow> = rows
                .iter()
                .map(|r| ReportRow {
                    name: r.name.clone(),
                    cm: r.cm,
                    metrics: r.metrics,
                })
                .collect();
            render_report(&plain, ReportFormat::Csv)
        }
        ReportFormat::Json => {
            serde_json::to_string_pretty(rows).expect("ablation rows always serialize")
        }
    }
}

/// Render the subtype accuracy table: one row per canonical category seen,
/// a violation row, and the overall total.
pub fn render_subtype(report: &SubtypeReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("| Bias Sub-Type | Correct | Incorrect | Total | Accuracy |\n");
            out.push_str("|---|---:|---:|---:|---:|\n");
            for row in &report.rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} |\n",
                    row.category.display_name(),
                    row.correct,
                    row.incorrect,
                    row.total(),
                    fmt_percent(row.accuracy())
                ));
            }
            if report.violation_count > 0 {
                let correct = if report.violation_correct > 0 {
                    report.violation_correct.to_string()
                } else {
                    "n/a".to_string()
                };
                out.push_str(&format!(
                    "| sub-type violation (hallucination) | {} | {} | {} | n/a |\n",
                    correct, report.violation_incorrect, report.violation_count
                ));
            }
            out.push_str(&format!(
                "| total (all classes) | {} | {} | {} | {} |\n",
                report.total_correct,
                report.total - report.total_correct,
                report.total,
                fmt_percent(report.overall_accuracy())
            ));
            out
        }
        ReportFormat::Csv => {
            let mut out = String::from("category,correct,incorrect,total,accuracy\n");
            for row in &report.rows {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_quote(row.category.display_name()),
                    row.correct,
                    row.incorrect,
                    row.total(),
                    fmt_percent(row.accuracy())
                ));
            }
            if report.violation_count > 0 {
                out.push_str(&format!(
                    "sub-type violation (hallucination),{},{},{},n/a\n",
                    report.violation_correct, report.violation_incorrect, report.violation_count
                ));
            }
            out.push_str(&format!(
                "total (all classes),{},{},{},{}\n",
                report.total_correct,
                report.total - report.total_correct,
                report.total,
                fmt_percent(report.overall_accuracy())
            ));
            out
        }
        ReportFormat::Json => {
            serde_json::to_string_pretty(report).expect("subtype report always serializes")
        }
    }
}
