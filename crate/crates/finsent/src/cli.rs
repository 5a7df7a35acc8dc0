//! Run configuration and command implementations.
//!
//! Commands are plain functions over a validated [`RunConfig`] so they can
//! be driven by the `finsent` binary or called directly with injected
//! models (which is how the offline test suite exercises them). Every
//! command is idempotent given a warm cache and a fixed config: reruns
//! produce byte-identical outputs. Markdown reports embed the resolved
//! config hash for provenance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    self, derive_all_agree, load_labeled_dataset, parse_corpus, CorpusError, CorpusFormat,
    Diagnostic, Document, TickerLexicon,
};
use crate::evaluation::{
    self, DatasetTag, EvalError, EvalReport, Evaluator, GainEntry, GainRow, GainSummary,
};
use crate::models::{
    classify_generative, classify_probabilistic, GenerativeModel, ModelError, Prediction,
    ProbabilisticModel,
};
use crate::prediction::{
    self, load_price_csv_path, PredictError, Regressor, RidgeRegressor, StockData, VariantData,
};
use crate::prompting::{ComponentSet, IdentifierTerm, InstructionSpec, PromptError, PromptSpec};
use crate::scoring::{
    build_index_series, read_index_csv, write_index_csv, ScoreError, ScoreMethod,
};
use crate::tz::ExchangeTz;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Predict(#[from] PredictError),
}

/// Which prompt families a bench run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchPrompt {
    Base,
    Aiap,
    Ablation,
    Fewshot,
}

impl std::str::FromStr for BenchPrompt {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" => Ok(BenchPrompt::Base),
            "aiap" => Ok(BenchPrompt::Aiap),
            "ablation" => Ok(BenchPrompt::Ablation),
            "fewshot" => Ok(BenchPrompt::Fewshot),
            other => Err(CliError::Config(format!("unknown prompt family {other:?}"))),
        }
    }
}

/// Declarative run configuration, usually loaded from a TOML file with
/// CLI-flag overrides applied before validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub tickers: Vec<String>,
    /// Exchange timezone for day bucketing: utc, us/eastern, or ±HH:MM.
    pub timezone: String,
    pub paths: PathsConfig,
    pub endpoint: Option<EndpointConfig>,
    pub bench: BenchConfig,
    pub score: ScoreConfig,
    pub predict: PredictConfig,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub instruction_spec: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// Ticker to daily price CSV.
    pub prices: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub auth_env: Option<String>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub concurrency: usize,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: String::new(),
            model_name: String::new(),
            auth_env: None,
            timeout_secs: 30,
            max_retries: 3,
            concurrency: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub prompt: String,
    pub identifiers: Vec<String>,
    /// all_agree or full.
    pub dataset: String,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            prompt: "aiap".into(),
            identifiers: vec!["news".into()],
            dataset: "full".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub methods: Vec<String>,
    pub date_start: Option<String>,
    pub date_end: Option<String>,
    /// Identifier term used when labels come from a generative model.
    pub identifier: String,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            methods: vec!["quantss".into()],
            date_start: None,
            date_end: None,
            identifier: "input".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictConfig {
    pub split: Option<String>,
    pub ridge: f64,
    pub variants: Vec<String>,
    /// Where index CSVs are read from; defaults to `out_dir`.
    pub index_dir: Option<PathBuf>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            split: None,
            ridge: 0.0,
            variants: vec!["baseline".into()],
            index_dir: None,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            out_dir: PathBuf::from("out"),
            tickers: Vec::new(),
            timezone: "us/eastern".into(),
            paths: PathsConfig::default(),
            endpoint: None,
            bench: BenchConfig::default(),
            score: ScoreConfig::default(),
            predict: PredictConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path)?;
        RunConfig::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Checks path existence and option well-formedness. Called by every
    /// command before any work happens.
    pub fn validate(&self) -> Result<(), CliError> {
        for (label, path) in [
            ("corpus", &self.paths.corpus),
            ("dataset", &self.paths.dataset),
            ("instruction_spec", &self.paths.instruction_spec),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(CliError::Config(format!(
                        "{label} path {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        for (ticker, path) in &self.paths.prices {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "price file for {ticker} ({}) does not exist",
                    path.display()
                )));
            }
        }
        self.exchange_tz()?;
        if let (Some(start), Some(end)) = (self.date_start()?, self.date_end()?) {
            if start > end {
                return Err(CliError::Config(format!(
                    "date range is not well-ordered: {start} > {end}"
                )));
            }
        }
        if !self.tickers.is_empty() {
            self.lexicon()?;
        }
        Ok(())
    }

    pub fn exchange_tz(&self) -> Result<ExchangeTz, CliError> {
        self.timezone
            .parse()
            .map_err(|e| CliError::Config(format!("{e}")))
    }

    pub fn lexicon(&self) -> Result<TickerLexicon, CliError> {
        TickerLexicon::new(self.tickers.iter().cloned()).map_err(CliError::from)
    }

    pub fn date_start(&self) -> Result<Option<NaiveDate>, CliError> {
        parse_date(self.score.date_start.as_deref(), "score.date_start")
    }

    pub fn date_end(&self) -> Result<Option<NaiveDate>, CliError> {
        parse_date(self.score.date_end.as_deref(), "score.date_end")
    }

    pub fn split_date(&self) -> Result<Option<NaiveDate>, CliError> {
        parse_date(self.predict.split.as_deref(), "predict.split")
    }

    pub fn instruction_spec(&self) -> Result<InstructionSpec, CliError> {
        match &self.paths.instruction_spec {
            Some(path) => Ok(InstructionSpec::load(path)?),
            None => Ok(InstructionSpec::bundled().clone()),
        }
    }

    /// Hash of the resolved configuration, embedded in reports.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").expect("writing to string cannot fail");
        }
        hex
    }

    fn short_hash(&self) -> String {
        self.config_hash()[..12].to_string()
    }
}

fn parse_date(value: Option<&str>, label: &str) -> Result<Option<NaiveDate>, CliError> {
    match value {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|e| CliError::Config(format!("bad {label} {s:?}: {e}"))),
    }
}

fn corpus_format_for(path: &Path) -> CorpusFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => CorpusFormat::Csv,
        _ => CorpusFormat::Jsonl,
    }
}

fn write_report(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, content)?;
    Ok(())
}

fn md_footer(config: &RunConfig) -> String {
    format!("\nconfig: {}\n", config.short_hash())
}

/// Ingest result: normalized store plus per-ticker-per-day counts.
#[derive(Debug)]
pub struct IngestOutput {
    pub documents: usize,
    pub diagnostics: Vec<Diagnostic>,
    pub summary: Vec<(String, NaiveDate, usize)>,
    pub store_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Parses the corpus, writes the normalized JSONL document store and a
/// `ticker,date,n_docs` summary CSV.
pub fn cmd_ingest(config: &RunConfig) -> Result<IngestOutput, CliError> {
    config.validate()?;
    let corpus_path = config
        .paths
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::Config("ingest needs paths.corpus".into()))?;
    let lexicon = config.lexicon()?;
    let tz = config.exchange_tz()?;

    let file = fs::File::open(corpus_path)?;
    let outcome = parse_corpus(
        BufReader::new(file),
        corpus_format_for(corpus_path),
        &lexicon,
    )?;

    fs::create_dir_all(&config.out_dir)?;
    let store_path = config.out_dir.join("documents.jsonl");
    let mut store = Vec::new();
    corpus::write_corpus_jsonl(&outcome.documents, &mut store)?;
    fs::write(&store_path, store)?;

    let mut counts: BTreeMap<(String, NaiveDate), usize> = BTreeMap::new();
    for doc in &outcome.documents {
        let date = tz.local_date(doc.timestamp);
        for ticker in &doc.tickers {
            *counts.entry((ticker.clone(), date)).or_default() += 1;
        }
    }
    let summary: Vec<(String, NaiveDate, usize)> = counts
        .into_iter()
        .map(|((ticker, date), n)| (ticker, date, n))
        .collect();

    let summary_path = config.out_dir.join("ingest_summary.csv");
    let mut csv_text = String::from("ticker,date,n_docs\n");
    for (ticker, date, n) in &summary {
        csv_text.push_str(&format!("{ticker},{date},{n}\n"));
    }
    write_report(&summary_path, &csv_text)?;

    Ok(IngestOutput {
        documents: outcome.documents.len(),
        diagnostics: outcome.diagnostics,
        summary,
        store_path,
        summary_path,
    })
}

/// Bench result: the evaluation reports plus the files written.
#[derive(Debug)]
pub struct BenchOutput {
    pub reports: Vec<EvalReport>,
    pub files: Vec<PathBuf>,
}

fn dataset_tag_for(config: &RunConfig) -> Result<DatasetTag, CliError> {
    match config.bench.dataset.as_str() {
        "all_agree" => Ok(DatasetTag::AllAgree),
        "full" => Ok(DatasetTag::Full),
        other => Ok(DatasetTag::Custom(other.to_string())),
    }
}

fn bench_identifiers(config: &RunConfig) -> Result<Vec<IdentifierTerm>, CliError> {
    config
        .bench
        .identifiers
        .iter()
        .map(|s| s.parse().map_err(CliError::Prompt))
        .collect()
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

/// Runs the configured prompt family over the configured identifiers and
/// dataset slice, writing accuracy, gain, ablation, or few-shot tables.
///
/// Per-sample progress is checkpointed under `out_dir/checkpoints/`, so an
/// aborted run resumes where it stopped and produces an identical report.
pub fn cmd_bench(
    config: &RunConfig,
    model: &dyn GenerativeModel,
    model_label: &str,
) -> Result<BenchOutput, CliError> {
    config.validate()?;
    let dataset_path = config
        .paths
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Config("bench needs paths.dataset".into()))?;
    let family: BenchPrompt = config.bench.prompt.parse()?;
    let identifiers = bench_identifiers(config)?;
    if identifiers.is_empty() {
        return Err(CliError::Config(
            "bench needs at least one identifier".into(),
        ));
    }
    let tag = dataset_tag_for(config)?;
    let instruction_spec = config.instruction_spec()?;

    let loaded = load_labeled_dataset(dataset_path)?;
    let samples = match tag {
        DatasetTag::AllAgree => derive_all_agree(&loaded.samples),
        _ => loaded.samples,
    };

    let checkpoint_dir = config.out_dir.join("checkpoints");
    fs::create_dir_all(&checkpoint_dir)?;
    let run = |spec: &PromptSpec| -> Result<EvalReport, CliError> {
        let name = format!(
            "bench_{}_{}_{}.jsonl",
            sanitize(&spec.family().to_string()),
            spec.identifier(),
            sanitize(&tag.to_string()),
        );
        let evaluator = Evaluator::with_checkpoint(checkpoint_dir.join(name));
        Ok(evaluator.evaluate(model, &samples, spec, &instruction_spec, tag.clone())?)
    };

    let mut reports = Vec::new();
    let mut gain_rows = Vec::new();
    let mut ablation_rows = Vec::new();
    let mut few_shot_rows = Vec::new();

    for identifier in &identifiers {
        let specs: Vec<PromptSpec> = match family {
            BenchPrompt::Base => vec![PromptSpec::base(*identifier)],
            BenchPrompt::Aiap => vec![
                PromptSpec::base(*identifier),
                PromptSpec::aiap(*identifier, ComponentSet::FULL)?,
            ],
            BenchPrompt::Ablation => {
                let mut specs = vec![PromptSpec::base(*identifier)];
                for components in ComponentSet::ABLATION {
                    specs.push(PromptSpec::aiap(*identifier, components)?);
                }
                specs
            }
            BenchPrompt::Fewshot => {
                let mut specs = vec![PromptSpec::base(*identifier)];
                for k in 1..=3 {
                    specs.push(PromptSpec::few_shot(
                        *identifier,
                        instruction_spec.shots(k),
                    )?);
                }
                specs.push(PromptSpec::aiap(*identifier, ComponentSet::FULL)?);
                specs
            }
        };
        let identifier_reports: Vec<EvalReport> =
            specs.iter().map(&run).collect::<Result<_, _>>()?;

        match family {
            BenchPrompt::Aiap => gain_rows.push(GainRow {
                model: model_label.to_string(),
                dataset: tag.to_string(),
                identifier: *identifier,
                entry: GainEntry::from_accuracies(
                    identifier_reports[0].accuracy * 100.0,
                    identifier_reports[1].accuracy * 100.0,
                ),
            }),
            BenchPrompt::Ablation => ablation_rows.push(evaluation::AblationRow {
                dataset: tag.to_string(),
                identifier: *identifier,
                values: [
                    identifier_reports[0].accuracy,
                    identifier_reports[1].accuracy,
                    identifier_reports[2].accuracy,
                    identifier_reports[3].accuracy,
                ],
            }),
            BenchPrompt::Fewshot => few_shot_rows.push(evaluation::FewShotRow {
                dataset: tag.to_string(),
                identifier: *identifier,
                values: [
                    identifier_reports[0].accuracy,
                    identifier_reports[1].accuracy,
                    identifier_reports[2].accuracy,
                    identifier_reports[3].accuracy,
                    identifier_reports[4].accuracy,
                ],
            }),
            BenchPrompt::Base => {}
        }
        reports.extend(identifier_reports);
    }

    let mut files = Vec::new();
    let mut emit = |name: &str, content: String| -> Result<(), CliError> {
        let path = config.out_dir.join(name);
        write_report(&path, &content)?;
        files.push(path);
        Ok(())
    };

    emit("bench_accuracy.csv", evaluation::eval_report_csv(&reports))?;
    emit(
        "bench_accuracy.md",
        format!(
            "{}{}",
            evaluation::eval_report_markdown(&reports),
            md_footer(config)
        ),
    )?;
    match family {
        BenchPrompt::Aiap => {
            emit("bench_gains.csv", evaluation::gain_table_csv(&gain_rows))?;
            emit(
                "bench_gains.md",
                format!(
                    "{}{}",
                    evaluation::gain_table_markdown(&gain_rows),
                    md_footer(config)
                ),
            )?;
        }
        BenchPrompt::Ablation => {
            emit(
                "bench_ablation.csv",
                evaluation::ablation_table_csv(&ablation_rows),
            )?;
            emit(
                "bench_ablation.md",
                format!(
                    "{}{}",
                    evaluation::ablation_table_markdown(&ablation_rows),
                    md_footer(config)
                ),
            )?;
        }
        BenchPrompt::Fewshot => {
            emit(
                "bench_fewshot.csv",
                evaluation::few_shot_table_csv(&few_shot_rows),
            )?;
            emit(
                "bench_fewshot.md",
                format!(
                    "{}{}",
                    evaluation::few_shot_table_markdown(&few_shot_rows),
                    md_footer(config)
                ),
            )?;
        }
        BenchPrompt::Base => {}
    }

    Ok(BenchOutput { reports, files })
}

/// Models available to the score command. The quantity method needs
/// labels from either model kind; the confidence method strictly needs a
/// probabilistic classifier.
#[derive(Default)]
pub struct ScoreModels<'a> {
    pub generative: Option<&'a dyn GenerativeModel>,
    pub probabilistic: Option<&'a dyn ProbabilisticModel>,
}

#[derive(Debug)]
pub struct ScoreOutput {
    pub files: Vec<PathBuf>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Classifies the corpus documents that mention configured tickers and
/// writes one index CSV per (ticker, method) into the output directory.
pub fn cmd_score(config: &RunConfig, models: &ScoreModels) -> Result<ScoreOutput, CliError> {
    config.validate()?;
    let corpus_path = config
        .paths
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::Config("score needs paths.corpus".into()))?;
    let (Some(start), Some(end)) = (config.date_start()?, config.date_end()?) else {
        return Err(CliError::Config(
            "score needs score.date_start and score.date_end".into(),
        ));
    };
    let methods: Vec<ScoreMethod> = config
        .score
        .methods
        .iter()
        .map(|m| m.parse().map_err(CliError::Score))
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(CliError::Config("score needs at least one method".into()));
    }
    let lexicon = config.lexicon()?;
    let tz = config.exchange_tz()?;

    let file = fs::File::open(corpus_path)?;
    let outcome = parse_corpus(
        BufReader::new(file),
        corpus_format_for(corpus_path),
        &lexicon,
    )?;
    let relevant: Vec<&Document> = outcome
        .documents
        .iter()
        .filter(|d| !d.tickers.is_empty())
        .filter(|d| {
            let date = tz.local_date(d.timestamp);
            date >= start && date <= end
        })
        .collect();

    let needs_probs = methods.contains(&ScoreMethod::Csbs);
    let predictions: Vec<Prediction> = if let Some(model) = models.probabilistic {
        relevant
            .iter()
            .map(|doc| classify_probabilistic(model, &doc.body, &doc.id))
            .collect::<Result<_, _>>()?
    } else if let Some(model) = models.generative {
        if needs_probs {
            return Err(CliError::Config(
                "the csbs method needs a probabilistic classifier; generative models yield labels only".into(),
            ));
        }
        let identifier: IdentifierTerm = config.score.identifier.parse()?;
        let instruction_spec = config.instruction_spec()?;
        let spec = PromptSpec::aiap(identifier, ComponentSet::FULL)?;
        relevant
            .iter()
            .map(|doc| {
                let prompt = spec.render(&doc.body, &instruction_spec)?;
                classify_generative(model, &prompt, &doc.id).map_err(CliError::Model)
            })
            .collect::<Result<_, _>>()?
    } else {
        return Err(CliError::Config("score needs a model".into()));
    };

    let docs: Vec<Document> = relevant.into_iter().cloned().collect();
    let mut files = Vec::new();
    fs::create_dir_all(&config.out_dir)?;
    for ticker in lexicon.symbols() {
        for method in &methods {
            let series =
                build_index_series(&docs, &predictions, ticker, (start, end), *method, tz)?;
            let path = config.out_dir.join(format!("index_{ticker}_{method}.csv"));
            let mut buf = Vec::new();
            write_index_csv(&series, &mut buf)?;
            fs::write(&path, buf)?;
            files.push(path);
        }
    }

    Ok(ScoreOutput {
        files,
        diagnostics: outcome.diagnostics,
    })
}

#[derive(Debug)]
pub struct PredictOutput {
    pub report: prediction::ExperimentReport,
    pub files: Vec<PathBuf>,
}

/// Joins price bars with previously scored index series and runs the
/// regression experiment with the built-in closed-form regressor.
pub fn cmd_predict(config: &RunConfig) -> Result<PredictOutput, CliError> {
    let regressors: Vec<Box<dyn Regressor>> =
        vec![Box::new(RidgeRegressor::new(config.predict.ridge))];
    cmd_predict_with(config, &regressors)
}

/// [`cmd_predict`] with an explicit regressor set (plug-ins included).
pub fn cmd_predict_with(
    config: &RunConfig,
    regressors: &[Box<dyn Regressor>],
) -> Result<PredictOutput, CliError> {
    config.validate()?;
    if config.paths.prices.is_empty() {
        return Err(CliError::Config("predict needs paths.prices".into()));
    }
    let split = config
        .split_date()?
        .ok_or_else(|| CliError::Config("predict needs predict.split".into()))?;
    if config.predict.variants.is_empty() {
        return Err(CliError::Config(
            "predict needs at least one variant".into(),
        ));
    }
    let index_dir = config
        .predict
        .index_dir
        .clone()
        .unwrap_or_else(|| config.out_dir.clone());

    let mut stocks = Vec::new();
    for (ticker, path) in &config.paths.prices {
        stocks.push(StockData {
            ticker: ticker.clone(),
            bars: load_price_csv_path(path)?,
        });
    }

    let mut variants = Vec::new();
    for name in &config.predict.variants {
        if name == "baseline" {
            variants.push(VariantData::baseline());
            continue;
        }
        let method: ScoreMethod = name.parse()?;
        let mut per_ticker = BTreeMap::new();
        for stock in &stocks {
            let path = index_dir.join(format!("index_{}_{method}.csv", stock.ticker));
            if !path.exists() {
                continue;
            }
            let series = read_index_csv(fs::File::open(&path)?)?;
            let filtered: Vec<_> = series
                .into_iter()
                .filter(|e| e.ticker == stock.ticker && e.method == method)
                .collect();
            per_ticker.insert(stock.ticker.clone(), filtered);
        }
        variants.push(VariantData {
            name: name.clone(),
            series: Some(per_ticker),
        });
    }

    let spec = prediction::ExperimentSpec {
        stocks,
        variants,
        split,
    };
    let report = prediction::run_experiment(&spec, regressors)?;

    let mut files = Vec::new();
    let mut emit = |name: &str, content: String| -> Result<(), CliError> {
        let path = config.out_dir.join(name);
        write_report(&path, &content)?;
        files.push(path);
        Ok(())
    };
    emit(
        "predict_metrics.csv",
        prediction::experiment_table_csv(&report),
    )?;
    emit(
        "predict_metrics.md",
        format!(
            "{}{}",
            prediction::experiment_table_markdown(&report),
            md_footer(config)
        ),
    )?;
    if !report.improvements.is_empty() {
        emit(
            "predict_improvement.csv",
            prediction::improvement_table_csv(&report),
        )?;
        emit(
            "predict_improvement.md",
            format!(
                "{}{}",
                prediction::improvement_table_markdown(&report),
                md_footer(config)
            ),
        )?;
    }

    Ok(PredictOutput { report, files })
}

#[derive(Debug)]
pub struct ReportOutput {
    pub rows: Vec<GainRow>,
    pub summary: GainSummary,
    pub files: Vec<PathBuf>,
}

/// Recomputes a gain table from published accuracy pairs.
///
/// The input CSV has columns `model,dataset,identifier,base,aiap`; the
/// output mirrors the gain-table layout plus a mean/max summary.
pub fn cmd_report(config: &RunConfig, pairs_path: &Path) -> Result<ReportOutput, CliError> {
    config.validate()?;
    let mut reader = csv::Reader::from_reader(fs::File::open(pairs_path)?);
    let headers = reader.headers().map_err(CorpusError::from)?.clone();
    let expect = ["model", "dataset", "identifier", "base", "aiap"];
    let header_ok = headers.len() >= 5 && headers.iter().take(5).eq(expect);
    if !header_ok {
        return Err(CliError::Config(format!(
            "pairs file needs header {}",
            expect.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(CorpusError::from)?;
        let line = idx + 2;
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let number = |i: usize| -> Result<f64, CliError> {
            record
                .get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| CliError::Config(format!("bad number on line {line}: {e}")))
        };
        rows.push(GainRow {
            model: field(0),
            dataset: field(1),
            identifier: field(2).parse()?,
            entry: GainEntry::from_accuracies(number(3)?, number(4)?),
        });
    }
    let entries: Vec<GainEntry> = rows.iter().map(|r| r.entry).collect();
    let summary = evaluation::mean_gain(&entries)?;

    let mut files = Vec::new();
    let csv_path = config.out_dir.join("report_gains.csv");
    write_report(&csv_path, &evaluation::gain_table_csv(&rows))?;
    files.push(csv_path);
    let md_path = config.out_dir.join("report_gains.md");
    let md = format!(
        "{}\nmean gain: {:.2}\nmax gain: {:.2}\n{}",
        evaluation::gain_table_markdown(&rows),
        summary.mean,
        summary.max,
        md_footer(config)
    );
    write_report(&md_path, &md)?;
    files.push(md_path);

    Ok(ReportOutput {
        rows,
        summary,
        files,
    })
}
