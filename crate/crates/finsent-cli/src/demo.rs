//! Offline demo material: a keyword sentiment model pair and generators
//! for a synthetic corpus, price files, and a ready-to-run config.
//!
//! The demo models score text by counting bullish and bearish keywords.
//! The generative variant understands more vocabulary the more annotator
//! instruction components its prompt carries, so bench runs show the
//! instruction ablation behaving sensibly. These models exist so every
//! subcommand can be exercised without network access or a real
//! classifier; swap in a remote endpoint or a plug-in model for real work.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use chrono::{Datelike, Duration, NaiveDate, Weekday};
use finsent::models::{ClassScores, FixtureModel, ModelError, ProbabilisticModel};

// Ordered so the tail entries are only "understood" with more instruction
// components present (see `tier_size`).
const BULLISH: &[&str] = &[
    "calls", "printing", "green", "moon", "rocket", "bull", "rally", "diamond", "ripping",
    "crushed", "raised", "breakout", "breaking",
];
const BEARISH: &[&str] = &[
    "puts",
    "cut",
    "short",
    "crash",
    "bear",
    "dump",
    "down",
    "bagholding",
    "bleeding",
    "dilution",
    "margin",
    "tanking",
    "shrinks",
];

fn keyword_hits(text: &str, words: &[&str]) -> usize {
    let lower = text.to_ascii_lowercase();
    words
        .iter()
        .filter(|w| {
            lower
                .split(|c: char| !c.is_ascii_alphanumeric())
                .any(|t| t == **w)
        })
        .count()
}

/// Keyword-count classifier exposing logits for the demo pipeline.
pub struct DemoLexicon;

impl ProbabilisticModel for DemoLexicon {
    fn scores(&self, text: &str) -> Result<ClassScores, ModelError> {
        let bull = keyword_hits(text, BULLISH);
        let bear = keyword_hits(text, BEARISH);
        Ok(ClassScores::Logits(vec![
            1.4 * bull as f64,
            1.4 * bear as f64,
            0.9,
        ]))
    }
}

fn tier_size(components: usize) -> usize {
    7 + 2 * components
}

/// Generative counterpart: replies with a label word chosen by keyword
/// counts over the prompt's final input line. Its usable vocabulary grows
/// with each instruction component present in the prompt.
pub fn demo_generative() -> FixtureModel {
    FixtureModel::from_fn(|prompt| {
        let input = prompt
            .lines()
            .rev()
            .find_map(|l| l.strip_prefix("Input: "))
            .unwrap_or(prompt);
        let components = ["Definition:", "Grounding:", "Example:"]
            .iter()
            .filter(|marker| prompt.contains(**marker))
            .count();
        let vocabulary = tier_size(components).min(BULLISH.len());
        let bull = keyword_hits(input, &BULLISH[..vocabulary]);
        let bear = keyword_hits(input, &BEARISH[..vocabulary]);
        let reply = if bull > bear {
            "positive"
        } else if bear > bull {
            "negative"
        } else {
            "neutral"
        };
        Ok(reply.to_string())
    })
}

const TICKERS: [&str; 2] = ["GME", "AMC"];

/// Smooth deterministic sentiment driver in [-1, 1] per ticker and day.
fn wave(ticker_index: usize, day: i64) -> f64 {
    let phase = ticker_index as f64 * 1.7;
    ((day as f64 / 9.0) + phase).sin() * 0.8
}

fn doc_text(ticker: &str, sentiment: f64, slot: usize) -> String {
    if sentiment > 0.25 {
        match slot % 3 {
            0 => format!("{ticker} calls printing, rocket is ripping"),
            1 => format!("loaded more {ticker}, breakout looks green"),
            _ => format!("{ticker} rally on, diamond hands"),
        }
    } else if sentiment < -0.25 {
        match slot % 3 {
            0 => format!("{ticker} puts paying, guidance cut again"),
            1 => format!("bagholding {ticker}, dilution incoming"),
            _ => format!("{ticker} tanking on margin calls"),
        }
    } else {
        match slot % 3 {
            0 => format!("{ticker} closed flat today"),
            1 => format!("earnings call for {ticker} is on Thursday"),
            _ => format!("anyone got the {ticker} float numbers"),
        }
    }
}

/// Writes the demo inputs under `dir`: the bundled labeled dataset, a
/// synthetic corpus whose sentiment drives next-day closes, per-ticker
/// price files, and a config wired to all of them.
pub fn write_demo_files(dir: &Path) -> anyhow::Result<Vec<String>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();

    let dataset_path = dir.join("wsbs.csv");
    finsent::corpus::fixtures::write_wsbs_csv(&dataset_path)?;
    written.push(dataset_path.display().to_string());

    // Corpus: 180 days, 3 docs per ticker-day, sentiment following the wave.
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let mut corpus = String::new();
    let mut doc_id = 0usize;
    for day in 0..180i64 {
        let date = start + Duration::days(day);
        for (ti, ticker) in TICKERS.iter().enumerate() {
            let s = wave(ti, day);
            for slot in 0..3usize {
                let ts = format!("{date}T{:02}:30:00Z", 14 + slot);
                let body = doc_text(ticker, s, slot + day as usize);
                let kind = if slot == 0 { "post" } else { "comment" };
                writeln!(
                    corpus,
                    r#"{{"id":"demo-{doc_id:05}","ts":"{ts}","kind":"{kind}","body":"{body}"}}"#
                )?;
                doc_id += 1;
            }
        }
    }
    let corpus_path = dir.join("corpus.jsonl");
    std::fs::write(&corpus_path, corpus)?;
    written.push(corpus_path.display().to_string());

    // Prices: weekday bars whose next-day close moves with the wave, with
    // independent open/high/low jitters so the columns stay well
    // conditioned for plain least squares.
    let mut price_paths = BTreeMap::new();
    for (ti, ticker) in TICKERS.iter().enumerate() {
        let mut close = 120.0 + 40.0 * ti as f64;
        let mut csv = String::from("date,open,high,low,close,volume\n");
        for day in 0..180i64 {
            let date = start + Duration::days(day);
            if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
                continue;
            }
            let open = close - 0.4 + 0.11 * (((day * 13) % 7) as f64 - 3.0);
            let high = close.max(open) + 0.5 + 0.07 * ((day * 5) % 9) as f64;
            let low = close.min(open) - 0.5 - 0.06 * ((day * 3) % 8) as f64;
            let volume = 900_000 + 35_000 * ((day * 7) % 11);
            writeln!(
                csv,
                "{date},{open:.4},{high:.4},{low:.4},{close:.4},{volume}"
            )?;
            close += 2.2 * wave(ti, day) + 0.35 * (((day * 17) % 13) as f64 - 6.0) / 6.0;
        }
        let path = dir.join(format!("prices_{ticker}.csv"));
        std::fs::write(&path, csv)?;
        written.push(path.display().to_string());
        price_paths.insert(*ticker, path);
    }

    let mut config = String::new();
    writeln!(config, "out_dir = \"{}\"", dir.join("out").display())?;
    writeln!(config, "tickers = [\"GME\", \"AMC\"]")?;
    writeln!(config, "timezone = \"utc\"\n")?;
    writeln!(config, "[paths]")?;
    writeln!(config, "corpus = \"{}\"", corpus_path.display())?;
    writeln!(config, "dataset = \"{}\"", dataset_path.display())?;
    writeln!(config, "[paths.prices]")?;
    for (ticker, path) in &price_paths {
        writeln!(config, "{ticker} = \"{}\"", path.display())?;
    }
    writeln!(config)?;
    writeln!(config, "[bench]")?;
    writeln!(config, "prompt = \"aiap\"")?;
    writeln!(config, "identifiers = [\"news\", \"tweet\", \"input\"]")?;
    writeln!(config, "dataset = \"all_agree\"\n")?;
    writeln!(config, "[score]")?;
    writeln!(config, "methods = [\"quantss\", \"csbs\"]")?;
    writeln!(config, "date_start = \"2021-01-01\"")?;
    writeln!(config, "date_end = \"2021-06-29\"\n")?;
    writeln!(config, "[predict]")?;
    writeln!(config, "split = \"2021-05-14\"")?;
    writeln!(config, "ridge = 0.0")?;
    writeln!(config, "variants = [\"baseline\", \"quantss\", \"csbs\"]")?;
    let config_path = dir.join("demo_config.toml");
    std::fs::write(&config_path, config)?;
    written.push(config_path.display().to_string());

    Ok(written)
}
