//! Sentence-level news bias detection harness for chat-completion models.
//!
//! The library covers the full loop: load a labeled sentence corpus, build
//! one of the catalog's prompt variants, dispatch blocks or individual
//! sentences to any chat-completions endpoint (or a deterministic mock),
//! repair and validate the returned JSON findings, align them back to the
//! input sentences, and score the result with confusion matrices, P/R/F1,
//! ablation comparisons and a majority-voted subtype evaluation. It also
//! exports chat-format fine-tuning data with held-out removal.
//!
//! Start with the runnable examples, one per capability:
//!
//! ```bash
//! cargo run --example ingest
//! cargo run --example prompt_variants
//! cargo run --example mock_run
//! cargo run --example ablation
//! cargo run --example parse_repair
//! cargo run --example finetune_export
//! cargo run --example subtype_eval
//! ```
//!
//! The same functionality is scriptable through the `biasharness` binary
//! (subcommands `ingest`, `run`, `ablate`, `subtype-eval`,
//! `export-finetune`, `report`).

pub mod backend;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod finetune;
pub mod pipeline;
pub mod prompting;
pub mod report;
pub mod types;

pub use backend::{
    cached_complete, Backend, CacheKey, ChatRequest, Completion, EndpointConfig, FileCache,
    HttpBackend, Message, MockBackend, MockScript, RetryPolicy, Role,
};
pub use dataset::{ColumnMap, Dataset, LabelCounts, Provenance, Sentence};
pub use error::{BackendError, Error, Result};
pub use evaluation::{
    ablation_rows, ablation_table, confusion, metrics, silver_label, subtype_accuracy,
    type_distribution, AblationRow, ConfusionMatrix, Metrics, SubtypeJudgment, SubtypeReport,
    Verdict,
};
pub use finetune::{build_finetune_set, write_jsonl, FinetuneExample, FinetuneSet, OracleFinding};
pub use pipeline::{
    align_findings, apply_threshold, filter_findings, make_blocks, parse_findings, run_detection,
    AlignConfig, AlignedFinding, Block, DetectionRun, EvaluationMode, ParseOutcome, RunOptions,
};
pub use prompting::{
    build_prompt, list_variants, render_messages, variant_spec, PromptBundle, PromptSpec,
    TemplateSet, VARIANT_NAMES,
};
pub use report::{render_ablation, render_report, render_subtype, ReportFormat, ReportRow};
pub use types::{
    parse_bias_type, validate_finding, AliasTable, BiasFinding, BiasType, FindingOut, GoldLabel,
    RawFinding, ValidatedFinding, ValidationFlag,
};
