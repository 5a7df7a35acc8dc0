//! `finsent` command-line interface.

mod demo;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use finsent::cli::{
    cmd_bench, cmd_ingest, cmd_predict, cmd_report, cmd_score, RunConfig, ScoreModels,
};
use finsent::models::{FixtureModel, GenerativeModel, ModelEndpoint, RemoteChatModel};

#[derive(Parser)]
#[command(
    name = "finsent",
    about = "Sentiment prompt benchmarking, daily sentiment indices, and stock-price regression backtests",
    version
)]
struct Cli {
    /// TOML run configuration; flags override individual fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus into the normalized store plus per-ticker-day counts.
    Ingest {
        /// Corpus file (JSONL, or CSV by extension).
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Comma-separated ticker lexicon, e.g. GME,AMC,SPY.
        #[arg(long)]
        tickers: Option<String>,
    },
    /// Benchmark prompt variants on a labeled dataset.
    Bench {
        /// Prompt family: base, aiap, ablation, or fewshot.
        #[arg(long)]
        prompt: Option<String>,
        /// Comma-separated identifier terms: input, news, tweet.
        #[arg(long)]
        identifier: Option<String>,
        /// Dataset slice: all_agree or full.
        #[arg(long)]
        dataset: Option<String>,
        /// Model override: "demo" (offline keyword model) or
        /// "constant:<reply>"; defaults to the configured endpoint.
        #[arg(long)]
        model: Option<String>,
    },
    /// Score the corpus into daily per-ticker sentiment index CSVs.
    Score {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        tickers: Option<String>,
        /// Comma-separated methods: quantss, csbs.
        #[arg(long)]
        methods: Option<String>,
        #[arg(long)]
        date_start: Option<String>,
        #[arg(long)]
        date_end: Option<String>,
        /// "demo" selects the offline keyword classifier (enables csbs).
        #[arg(long)]
        classifier: Option<String>,
        /// Generative model override, as in bench.
        #[arg(long)]
        model: Option<String>,
    },
    /// Regression backtest over price files and scored index series.
    Predict {
        /// Repeatable TICKER=path price CSV assignments.
        #[arg(long, value_name = "TICKER=PATH")]
        prices: Vec<String>,
        /// Directory holding index_{ticker}_{method}.csv files.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Split boundary date, e.g. 2021-12-31 (train side inclusive).
        #[arg(long)]
        split: Option<String>,
        /// Ridge strength for the built-in regressor.
        #[arg(long)]
        ridge: Option<f64>,
        /// Comma-separated variants: baseline, quantss, csbs.
        #[arg(long)]
        variants: Option<String>,
    },
    /// Recompute a gain table from published accuracy pairs.
    Report {
        /// CSV with columns model,dataset,identifier,base,aiap.
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Write the bundled demo inputs (dataset, corpus, prices, config).
    Fixtures {
        /// Target directory.
        #[arg(long, default_value = "demo")]
        dir: PathBuf,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn split_csv(list: &str) -> Vec<String> {
    list.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn build_generative(
    config: &RunConfig,
    model_flag: Option<&str>,
) -> anyhow::Result<(Box<dyn GenerativeModel>, String)> {
    match model_flag {
        Some("demo") => Ok((Box::new(demo::demo_generative()), "demo-lexicon".into())),
        Some(flag) if flag.starts_with("constant:") => {
            let reply = flag.trim_start_matches("constant:").to_string();
            Ok((Box::new(FixtureModel::constant(reply)), "constant".into()))
        }
        Some(other) => bail!("unknown model {other:?} (expected demo or constant:<reply>)"),
        None => {
            let endpoint_config = config
                .endpoint
                .as_ref()
                .context("no [endpoint] configured; pass --model demo for an offline run")?;
            let mut endpoint = ModelEndpoint::new(
                endpoint_config.base_url.clone(),
                endpoint_config.model_name.clone(),
            );
            endpoint.auth_env = endpoint_config.auth_env.clone();
            endpoint.timeout = Duration::from_secs(endpoint_config.timeout_secs);
            endpoint.max_retries = endpoint_config.max_retries;
            endpoint.concurrency = endpoint_config.concurrency;
            endpoint.cache_dir = config.paths.cache_dir.clone();
            let label = endpoint.model_name.clone();
            Ok((Box::new(RemoteChatModel::new(endpoint)?), label))
        }
    }
}

fn print_warnings(warnings: &[impl std::fmt::Display]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let mut config = load_config(&cli)?;

    match &cli.command {
        Command::Ingest { corpus, tickers } => {
            if let Some(path) = corpus {
                config.paths.corpus = Some(path.clone());
            }
            if let Some(list) = tickers {
                config.tickers = split_csv(list);
            }
            let output = cmd_ingest(&config)?;
            print_warnings(&output.diagnostics);
            println!(
                "ingested {} documents ({} rejected) -> {}",
                output.documents,
                output.diagnostics.len(),
                output.store_path.display()
            );
            println!("summary: {}", output.summary_path.display());
        }
        Command::Bench {
            prompt,
            identifier,
            dataset,
            model,
        } => {
            if let Some(prompt) = prompt {
                config.bench.prompt = prompt.clone();
            }
            if let Some(list) = identifier {
                config.bench.identifiers = split_csv(list);
            }
            if let Some(tag) = dataset {
                config.bench.dataset = tag.clone();
            }
            let (model, label) = build_generative(&config, model.as_deref())?;
            let output = cmd_bench(&config, model.as_ref(), &label)?;
            for report in &output.reports {
                println!(
                    "{} / {} / {}: accuracy {:.2} ({} of {}, {} unparseable)",
                    report.family,
                    report.identifier,
                    report.dataset,
                    report.accuracy * 100.0,
                    report.correct,
                    report.n,
                    report.unparseable
                );
            }
            for file in &output.files {
                println!("wrote {}", file.display());
            }
        }
        Command::Score {
            corpus,
            tickers,
            methods,
            date_start,
            date_end,
            classifier,
            model,
        } => {
            if let Some(path) = corpus {
                config.paths.corpus = Some(path.clone());
            }
            if let Some(list) = tickers {
                config.tickers = split_csv(list);
            }
            if let Some(list) = methods {
                config.score.methods = split_csv(list);
            }
            if let Some(date) = date_start {
                config.score.date_start = Some(date.clone());
            }
            if let Some(date) = date_end {
                config.score.date_end = Some(date.clone());
            }
            let demo_classifier = demo::DemoLexicon;
            let generative: Option<(Box<dyn GenerativeModel>, String)> = match classifier.as_deref()
            {
                Some("demo") => None,
                Some(other) => bail!("unknown classifier {other:?} (expected demo)"),
                None => Some(build_generative(&config, model.as_deref())?),
            };
            let models = match (&generative, classifier.as_deref()) {
                (_, Some("demo")) => ScoreModels {
                    generative: None,
                    probabilistic: Some(&demo_classifier),
                },
                (Some((model, _)), _) => ScoreModels {
                    generative: Some(model.as_ref()),
                    probabilistic: None,
                },
                (None, _) => unreachable!("generative built unless classifier is demo"),
            };
            let output = cmd_score(&config, &models)?;
            print_warnings(&output.diagnostics);
            for file in &output.files {
                println!("wrote {}", file.display());
            }
        }
        Command::Predict {
            prices,
            index,
            split,
            ridge,
            variants,
        } => {
            if !prices.is_empty() {
                let mut map = BTreeMap::new();
                for assignment in prices.iter().flat_map(|p| p.split(',')) {
                    let (ticker, path) = assignment.split_once('=').with_context(|| {
                        format!("bad --prices entry {assignment:?}, expected TICKER=path")
                    })?;
                    map.insert(ticker.trim().to_string(), PathBuf::from(path.trim()));
                }
                config.paths.prices = map;
            }
            if let Some(dir) = index {
                config.predict.index_dir = Some(dir.clone());
            }
            if let Some(date) = split {
                config.predict.split = Some(date.clone());
            }
            if let Some(lambda) = ridge {
                config.predict.ridge = *lambda;
            }
            if let Some(list) = variants {
                config.predict.variants = split_csv(list);
            }
            let output = cmd_predict(&config)?;
            print_warnings(&output.report.warnings);
            for cell in &output.report.cells {
                match &cell.result {
                    Ok(metrics) => println!(
                        "{} / {}: rmse {:.4} mae {:.4} (train {}, test {})",
                        cell.stock,
                        cell.variant,
                        metrics.avg_rmse,
                        metrics.avg_mae,
                        metrics.train_rows,
                        metrics.test_rows
                    ),
                    Err(e) => println!("{} / {}: failed: {e}", cell.stock, cell.variant),
                }
            }
            for (variant, improvement) in &output.report.variant_averages {
                println!(
                    "improvement {variant}: rmse {:.2}% mae {:.2}%",
                    improvement.rmse_pct, improvement.mae_pct
                );
            }
            for file in &output.files {
                println!("wrote {}", file.display());
            }
        }
        Command::Report { pairs } => {
            let output = cmd_report(&config, pairs)?;
            println!(
                "{} pairs: mean gain {:.2}, max gain {:.2}",
                output.rows.len(),
                output.summary.mean,
                output.summary.max
            );
            for file in &output.files {
                println!("wrote {}", file.display());
            }
        }
        Command::Fixtures { dir } => {
            let written = demo::write_demo_files(dir)?;
            for file in written {
                println!("wrote {file}");
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
