//! Command-line entry points. Parsing lives here so commands stay callable
//! from tests; the binary is a thin wrapper around [`execute`].

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, EndpointConfig, FileCache, HttpBackend, MockScript};
use crate::dataset::{ColumnMap, Dataset};
use crate::error::{Error, Result};
use crate::evaluation::{ablation_table, confusion, read_judgments, subtype_accuracy};
use crate::finetune::{build_finetune_set, write_jsonl, OracleFinding};
use crate::pipeline::{run_detection, DetectionRun, EvaluationMode, RunOptions};
use crate::prompting::{variant_spec, TemplateSet, VARIANT_NAMES};
use crate::report::{
    fmt_percent, parse_report_csv, render_ablation, render_report, render_subtype, ReportFormat,
    ReportRow,
};
use crate::types::parse_bias_type;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Blocks,
    Individual,
}

/// Detect sentence-level news bias with chat-completion models and score
/// the results against gold labels.
#[derive(Debug, Parser)]
#[command(name = "biasharness", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Labeled sentence file (delimiter-separated, UTF-8).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,

    /// Evaluation mode.
    #[arg(long, global = true, value_enum, default_value = "blocks")]
    pub mode: ModeArg,

    /// Sentences per block in block mode.
    #[arg(long, global = true, default_value_t = EvaluationMode::DEFAULT_BLOCK_SIZE)]
    pub block_size: usize,

    /// Prompt variant name from the catalog.
    #[arg(long, global = true, default_value = "base")]
    pub variant: String,

    /// Model identifier sent to the endpoint.
    #[arg(long, global = true, default_value = "gpt-3.5-turbo-16k")]
    pub model: String,

    /// Endpoint base URL, or `mock:<script.json>` for an offline scripted
    /// backend.
    #[arg(long, global = true, env = "BIASHARNESS_ENDPOINT")]
    pub endpoint: Option<String>,

    /// Override the variant's temperature.
    #[arg(long, global = true)]
    pub temperature: Option<f64>,

    /// Override the variant's bias-score threshold.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,

    /// Completion cache directory.
    #[arg(long, global = true, default_value = "cache")]
    pub cache_dir: PathBuf,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Seed for all randomness (sampling, shuffles).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Maximum in-flight requests.
    #[arg(long, global = true, default_value_t = 4)]
    pub concurrency: usize,

    /// Environment variable holding the endpoint credential.
    #[arg(long, global = true, default_value = crate::backend::DEFAULT_API_KEY_ENV)]
    pub api_key_env: String,

    /// Request timeout in seconds.
    #[arg(long, global = true, default_value_t = 60)]
    pub timeout: u64,

    /// Column holding the sentence text.
    #[arg(long, global = true, default_value = "text")]
    pub text_col: String,

    /// Column holding the gold label.
    #[arg(long, global = true, default_value = "label_bias")]
    pub label_col: String,

    /// Column holding the outlet (optional in the file).
    #[arg(long, global = true, default_value = "outlet")]
    pub outlet_col: String,

    /// Column holding the topic (optional in the file).
    #[arg(long, global = true, default_value = "topic")]
    pub topic_col: String,

    /// Gold label spelling for biased sentences.
    #[arg(long, global = true, default_value = "Biased")]
    pub label_biased: String,

    /// Gold label spelling for non-biased sentences.
    #[arg(long, global = true, default_value = "Non-biased")]
    pub label_nonbiased: String,

    /// Gold label spelling for undecided sentences.
    #[arg(long, global = true, default_value = "No agreement")]
    pub label_undecided: String,

    /// Field delimiter of the dataset file.
    #[arg(long, global = true, default_value = ",")]
    pub delimiter: char,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and clean a dataset, printing label statistics.
    Ingest,
    /// Run detection over the dataset and score it.
    Run,
    /// Run several prompt variants and compare them against the first.
    Ablate {
        /// Comma-separated variant names; defaults to the full catalog.
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
    },
    /// Sample findings for human subtype annotation, or score a filled
    /// judgment file.
    #[command(name = "subtype-eval")]
    SubtypeEval {
        /// Run directory produced by `run`.
        #[arg(long)]
        run_dir: PathBuf,
        /// Sample size when emitting an annotation sheet.
        #[arg(long, default_value_t = 100)]
        sample: usize,
        /// Filled judgment file; when present the accuracy table is printed
        /// instead of a sample sheet.
        #[arg(long)]
        judgments: Option<PathBuf>,
        /// Number of judges (columns judge1..judgeK); must be odd.
        #[arg(long, default_value_t = 3)]
        judges: usize,
    },
    /// Build fine-tuning examples and the held-out remainder dataset.
    #[command(name = "export-finetune")]
    ExportFinetune {
        /// Number of examples to export.
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// JSON file mapping sentence id to oracle finding.
        #[arg(long)]
        oracle: PathBuf,
    },
    /// Re-render a stored result table.
    Report {
        /// Result rows as .json or .csv.
        #[arg(long)]
        input: PathBuf,
        /// markdown, csv or json.
        #[arg(long, default_value = "markdown")]
        format: String,
    },
}

/// Output of a command: text for stdout plus the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CmdOutput {
    pub text: String,
    pub exit_code: i32,
}

impl CmdOutput {
    fn ok(text: String) -> Self {
        CmdOutput { text, exit_code: 0 }
    }
}

/// Resolved configuration for data-touching commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_path: PathBuf,
    pub columns: ColumnMap,
    pub mode: EvaluationMode,
    pub variant: String,
    pub model: String,
    pub endpoint: Option<String>,
    pub api_key_env: String,
    pub timeout: u64,
    pub temperature: Option<f64>,
    pub threshold: Option<f64>,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub concurrency: usize,
}

impl Cli {
    fn column_map(&self) -> ColumnMap {
        ColumnMap {
            text_column: self.text_col.clone(),
            label_column: self.label_col.clone(),
            outlet_column: Some(self.outlet_col.clone()),
            topic_column: Some(self.topic_col.clone()),
            biased_label: self.label_biased.clone(),
            non_biased_label: self.label_nonbiased.clone(),
            undecided_label: self.label_undecided.clone(),
            delimiter: self.delimiter,
        }
    }

    fn mode(&self) -> EvaluationMode {
        match self.mode {
            ModeArg::Blocks => EvaluationMode::Blocks {
                size: self.block_size,
            },
            ModeArg::Individual => EvaluationMode::Individual,
        }
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let dataset_path = self
            .dataset
            .clone()
            .ok_or_else(|| Error::Config("--dataset is required for this command".into()))?;
        if !dataset_path.exists() {
            return Err(Error::Config(format!(
                "dataset path {} does not exist",
                dataset_path.display()
            )));
        }
        Ok(RunConfig {
            dataset_path,
            columns: self.column_map(),
            mode: self.mode(),
            variant: self.variant.clone(),
            model: self.model.clone(),
            endpoint: self.endpoint.clone(),
            api_key_env: self.api_key_env.clone(),
            timeout: self.timeout,
            temperature: self.temperature,
            threshold: self.threshold,
            cache_dir: self.cache_dir.clone(),
            out_dir: self.out.clone(),
            seed: self.seed,
            concurrency: self.concurrency,
        })
    }
}

fn make_backend(config: &RunConfig) -> Result<Box<dyn Backend>> {
    let endpoint = config.endpoint.clone().ok_or_else(|| {
        Error::Config(
            "no endpoint configured: pass --endpoint or set BIASHARNESS_ENDPOINT".into(),
        )
    })?;
    if let Some(script_path) = endpoint.strip_prefix("mock:") {
        return Ok(Box::new(MockScript::load(Path::new(script_path))?));
    }
    let mut endpoint_config = EndpointConfig::new(endpoint);
    endpoint_config.api_key_env = config.api_key_env.clone();
    endpoint_config.timeout_secs = config.timeout;
    Ok(Box::new(HttpBackend::new(endpoint_config)))
}

fn load_prepared(config: &RunConfig) -> Result<Dataset> {
    let loaded = Dataset::load(&config.dataset_path, &config.columns)?;
    let cleaned = loaded.clean();
    cleaned.prepare_for_mode(&config.mode)
}

fn effective_spec(config: &RunConfig, variant: &str) -> Result<crate::prompting::PromptSpec> {
    let mut spec = variant_spec(variant)?;
    if let Some(t) = config.temperature {
        spec.temperature = t;
    }
    if let Some(t) = config.threshold {
        spec.score_threshold = Some(t);
    }
    spec.validate()?;
    Ok(spec)
}

fn run_one_variant(
    config: &RunConfig,
    variant: &str,
    dataset: &Dataset,
    backend: &dyn Backend,
    cache: &FileCache,
    out_dir: &Path,
) -> Result<DetectionRun> {
    let spec = effective_spec(config, variant)?;
    let mut options = RunOptions::new(config.model.clone(), variant, spec, config.mode);
    options.concurrency = config.concurrency;
    options.seed = config.seed;
    options.column_map = Some(config.columns.clone());
    let run = run_detection(dataset, &options, &TemplateSet::builtin(), backend, cache)?;
    run.save(out_dir)?;
    let cm = confusion(&run, dataset)?;
    std::fs::write(
        out_dir.join("metrics.json"),
        serde_json::to_vec_pretty(&[ReportRow::new(variant, cm)])?,
    )?;
    Ok(run)
}

/// `ingest`: load, clean, print statistics.
pub fn cmd_ingest(config: &RunConfig) -> Result<CmdOutput> {
    let loaded = Dataset::load(&config.dataset_path, &config.columns)?;
    let raw_stats = loaded.stats();
    let cleaned = loaded.clean();
    let stats = cleaned.stats();
    let mut text = format!(
        "{} sentences ({} biased, {} non-biased)\n",
        cleaned.len(),
        stats.biased,
        stats.non_biased
    );
    if raw_stats.undecided > 0 {
        text.push_str(&format!(
            "removed {} undecided of {} loaded\n",
            raw_stats.undecided,
            loaded.len()
        ));
    }
    for warning in &loaded.load_warnings {
        text.push_str(&format!("warning: {warning}\n"));
    }
    text.push_str(&format!("sha256: {}\n", cleaned.provenance.sha256));
    Ok(CmdOutput::ok(text))
}

/// `run`: one variant end to end, persisted run directory plus metrics.
pub fn cmd_run(config: &RunConfig) -> Result<CmdOutput> {
    effective_spec(config, &config.variant)?;
    let dataset = load_prepared(config)?;
    let backend = make_backend(config)?;
    let cache = FileCache::new(&config.cache_dir);
    let run = run_one_variant(
        config,
        &config.variant,
        &dataset,
        backend.as_ref(),
        &cache,
        &config.out_dir,
    )?;
    let cm = confusion(&run, &dataset)?;
    let row = ReportRow::new(config.variant.clone(), cm);
    let mut text = render_report(&[row], ReportFormat::Markdown);
    text.push_str(&format!(
        "coverage: {} ({} of {} units)\n",
        fmt_percent(run.coverage()),
        run.manifest.covered_units,
        run.manifest.unit_count
    ));
    text.push_str(&format!("run directory: {}\n", config.out_dir.display()));
    let exit_code = if run.manifest.covered_units < run.manifest.unit_count {
        Error::PartialCoverage {
            covered: run.manifest.covered_units,
            total: run.manifest.unit_count,
        }
        .exit_code()
    } else {
        0
    };
    Ok(CmdOutput { text, exit_code })
}

/// `ablate`: run a variant list (catalog order) and compare against the
/// first row.
pub fn cmd_ablate(config: &RunConfig, variants: &Option<Vec<String>>) -> Result<CmdOutput> {
    let names: Vec<String> = match variants {
        Some(list) if !list.is_empty() => list.clone(),
        _ => VARIANT_NAMES.iter().map(|s| s.to_string()).collect(),
    };
    for name in &names {
        variant_spec(name)?;
    }
    let dataset = load_prepared(config)?;
    let backend = make_backend(config)?;
    let cache = FileCache::new(&config.cache_dir);

    let mut runs = Vec::with_capacity(names.len());
    for name in &names {
        let out_dir = config.out_dir.join(name);
        runs.push(run_one_variant(config, name, &dataset, backend.as_ref(), &cache, &out_dir)?);
    }
    let run_refs: Vec<&DetectionRun> = runs.iter().collect();
    let rows = ablation_table(&run_refs, &dataset)?;
    let table = render_ablation(&rows, ReportFormat::Markdown);
    std::fs::write(
        config.out_dir.join("ablation.json"),
        render_ablation(&rows, ReportFormat::Json),
    )?;
    std::fs::write(config.out_dir.join("ablation.md"), &table)?;

    let mut text = table;
    let partial: Vec<&DetectionRun> = runs
        .iter()
        .filter(|r| r.manifest.covered_units < r.manifest.unit_count)
        .collect();
    for run in &partial {
        text.push_str(&format!(
            "coverage note: {} covered {} of {} units\n",
            run.manifest.variant, run.manifest.covered_units, run.manifest.unit_count
        ));
    }
    Ok(CmdOutput {
        text,
        exit_code: if partial.is_empty() { 0 } else { 5 },
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct OracleFileEntry {
    bias_type: String,
    #[serde(default)]
    bias_score: Option<f64>,
    #[serde(default)]
    description: String,
}

fn load_oracle(path: &Path) -> Result<HashMap<usize, OracleFinding>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read oracle file {}: {e}", path.display())))?;
    let raw: HashMap<String, OracleFileEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("oracle file {}: {e}", path.display())))?;
    let mut oracle = HashMap::with_capacity(raw.len());
    for (key, entry) in raw {
        let id: usize = key
            .parse()
            .map_err(|_| Error::Config(format!("oracle key {key:?} is not a sentence id")))?;
        oracle.insert(
            id,
            OracleFinding {
                bias_type: parse_bias_type(&entry.bias_type)?,
                bias_score: entry.bias_score,
                description: entry.description,
            },
        );
    }
    Ok(oracle)
}

/// `export-finetune`: JSONL examples plus the remainder dataset.
pub fn cmd_export_finetune(config: &RunConfig, n: usize, oracle_path: &Path) -> Result<CmdOutput> {
    let dataset = load_prepared(config)?;
    let oracle = load_oracle(oracle_path)?;
    let spec = effective_spec(config, &config.variant)?;
    let set = build_finetune_set(
        &dataset,
        n,
        &config.mode,
        &spec,
        &TemplateSet::builtin(),
        &oracle,
        config.seed,
    )?;

    std::fs::create_dir_all(&config.out_dir)?;
    let jsonl_path = config.out_dir.join("finetune.jsonl");
    write_jsonl(&set.examples, &jsonl_path)?;
    let remaining_path = config.out_dir.join("remaining.csv");
    set.remaining.write_csv(&remaining_path, &config.columns)?;
    let manifest_path = config.out_dir.join("finetune_manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_vec_pretty(&serde_json::json!({
            "seed": set.seed,
            "n": n,
            "mode": config.mode,
            "variant": config.variant,
            "dataset_sha256": dataset.provenance.sha256,
            "consumed_sentence_ids": set.consumed_ids,
        }))?,
    )?;

    Ok(CmdOutput::ok(format!(
        "wrote {} examples to {}\nremaining dataset ({} sentences) at {}\nmanifest at {}\n",
        set.examples.len(),
        jsonl_path.display(),
        set.remaining.len(),
        remaining_path.display(),
        manifest_path.display()
    )))
}

/// `subtype-eval`: emit a seeded sample sheet, or score a filled one.
pub fn cmd_subtype_eval(
    config: &RunConfig,
    run_dir: &Path,
    sample: usize,
    judgments: &Option<PathBuf>,
    judges: usize,
) -> Result<CmdOutput> {
    if judges == 0 || judges.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "--judges must be odd, got {judges}"
        )));
    }
    if let Some(judgment_path) = judgments {
        let judgments = read_judgments(judgment_path, judges)?;
        let report = subtype_accuracy(&judgments)?;
        let table = render_subtype(&report, ReportFormat::Markdown);
        std::fs::create_dir_all(&config.out_dir)?;
        std::fs::write(
            config.out_dir.join("subtype_report.json"),
            render_subtype(&report, ReportFormat::Json),
        )?;
        return Ok(CmdOutput::ok(table));
    }

    let run = DetectionRun::load(run_dir)?;
    let pool = run.collapsed_by_sentence();
    if sample > pool.len() {
        return Err(Error::Data(format!(
            "sample size {sample} exceeds the {} flagged sentences available",
            pool.len()
        )));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);

    std::fs::create_dir_all(&config.out_dir)?;
    let sheet_path = config.out_dir.join("sample_sheet.csv");
    let mut writer = csv::Writer::from_path(&sheet_path)?;
    let mut header = vec![
        "sample_id".to_string(),
        "category".to_string(),
        "sentence_id".to_string(),
        "sentence".to_string(),
        "description".to_string(),
    ];
    for judge in 1..=judges {
        header.push(format!("judge{judge}"));
    }
    writer.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for (i, index) in order[..sample].iter().enumerate() {
        let aligned = &pool[*index];
        let mut record = vec![
            format!("s{:04}", i),
            aligned.finding.bias_type.display_name().to_string(),
            aligned.sentence_id.to_string(),
            aligned.finding.sentence_text.clone(),
            aligned.finding.description.clone(),
        ];
        record.extend(std::iter::repeat_n(String::new(), judges));
        writer.write_record(&record).map_err(|e| Error::Data(e.to_string()))?;
    }
    writer.flush()?;

    std::fs::write(
        config.out_dir.join("sample_manifest.json"),
        serde_json::to_vec_pretty(&serde_json::json!({
            "seed": config.seed,
            "sample": sample,
            "judges": judges,
            "run_dir": run_dir.display().to_string(),
            "run_dataset_sha256": run.manifest.dataset_sha256,
            "pool_size": pool.len(),
        }))?,
    )?;

    Ok(CmdOutput::ok(format!(
        "wrote {sample} samples (seed {}) to {}\nfill judge columns with right|wrong, then re-run with --judgments\n",
        config.seed,
        sheet_path.display()
    )))
}

/// `report`: re-render stored result rows.
pub fn cmd_report(input: &Path, format: &str) -> Result<CmdOutput> {
    let format: ReportFormat = format.parse()?;
    let text = std::fs::read_to_string(input)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", input.display())))?;
    let rows: Vec<ReportRow> = match input.extension().and_then(|e| e.to_str()) {
        Some("csv") => parse_report_csv(&text)?,
        _ => serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", input.display())))?,
    };
    Ok(CmdOutput::ok(render_report(&rows, format)))
}

/// Dispatch a parsed command line.
pub fn execute(cli: &Cli) -> Result<CmdOutput> {
    match &cli.command {
        Command::Ingest => cmd_ingest(&cli.run_config()?),
        Command::Run => cmd_run(&cli.run_config()?),
        Command::Ablate { variants } => cmd_ablate(&cli.run_config()?, variants),
        Command::SubtypeEval {
            run_dir,
            sample,
            judgments,
            judges,
        } => {
            // dataset not needed: everything comes from the run directory
            let config = RunConfig {
                dataset_path: PathBuf::new(),
                columns: cli.column_map(),
                mode: cli.mode(),
                variant: cli.variant.clone(),
                model: cli.model.clone(),
                endpoint: cli.endpoint.clone(),
                api_key_env: cli.api_key_env.clone(),
                timeout: cli.timeout,
                temperature: cli.temperature,
                threshold: cli.threshold,
                cache_dir: cli.cache_dir.clone(),
                out_dir: cli.out.clone(),
                seed: cli.seed,
                concurrency: cli.concurrency,
            };
            cmd_subtype_eval(&config, run_dir, *sample, judgments, *judges)
        }
        Command::ExportFinetune { n, oracle } => {
            cmd_export_finetune(&cli.run_config()?, *n, oracle)
        }
        Command::Report { input, format } => cmd_report(input, format),
    }
}
