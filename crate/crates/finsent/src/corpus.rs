//! Corpus ingestion: raw social-media documents, labeled sentiment datasets,
//! ticker mention detection, and dataset statistics.
//!
//! Two input families are handled here. The document corpus (JSONL or CSV,
//! one record per post/comment) feeds the scoring pipeline; the labeled
//! dataset (CSV with optional per-annotator columns) feeds the benchmark
//! harness. Both loaders follow a partial-failure contract: malformed rows
//! become per-row diagnostics instead of aborting the whole load.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod fixtures;

/// Errors raised by corpus loading and statistics.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid ticker symbol {symbol:?}: {reason}")]
    InvalidTicker { symbol: String, reason: String },
    #[error("ticker lexicon must not be empty")]
    EmptyLexicon,
    #[error("cannot compute a class distribution over an empty dataset")]
    EmptyDataset,
    #[error("dataset file {path:?} has no usable header: {reason}")]
    BadHeader { path: String, reason: String },
}

/// One of the three sentiment classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

impl SentimentLabel {
    /// All labels, in the fixed reporting order.
    pub const ALL: [SentimentLabel; 3] = [
        SentimentLabel::Positive,
        SentimentLabel::Negative,
        SentimentLabel::Neutral,
    ];

    /// Case-insensitive parse of `positive`/`negative`/`neutral`.
    pub fn parse(s: &str) -> Option<SentimentLabel> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Some(SentimentLabel::Positive),
            "negative" => Some(SentimentLabel::Negative),
            "neutral" => Some(SentimentLabel::Neutral),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
        }
    }

    /// Index into `[positive, negative, neutral]` arrays.
    pub fn index(&self) -> usize {
        match self {
            SentimentLabel::Positive => 0,
            SentimentLabel::Negative => 1,
            SentimentLabel::Neutral => 2,
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a document is a top-level post or a comment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocKind {
    Post,
    Comment,
}

impl DocKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DocKind::Post => "post",
            DocKind::Comment => "comment",
        }
    }
}

/// One post or comment with detected ticker mentions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    /// UTC instant, truncated to second precision.
    pub timestamp: DateTime<Utc>,
    pub kind: DocKind,
    pub body: String,
    pub tickers: BTreeSet<String>,
}

/// How a labeled sample's gold label was settled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    /// All first-round annotations agreed.
    Unanimous,
    /// Settled by majority voting, or annotation history is unavailable.
    Resolved,
}

/// A labeled text sample with its annotation history.
///
/// `round1` holds the recorded annotations when the source file carries
/// them (two or more entries); it is empty for datasets published without
/// per-annotator columns, in which case `agreement` is `Resolved`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSample {
    pub id: String,
    pub text: String,
    pub gold: SentimentLabel,
    pub agreement: Agreement,
    pub round1: Vec<SentimentLabel>,
}

/// Per-label class fractions of a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub total: usize,
    pub positive: f64,
    pub negative: f64,
    pub neutral: f64,
}

impl DatasetStats {
    pub fn fraction(&self, label: SentimentLabel) -> f64 {
        match label {
            SentimentLabel::Positive => self.positive,
            SentimentLabel::Negative => self.negative,
            SentimentLabel::Neutral => self.neutral,
        }
    }
}

/// A per-record problem encountered while loading, with its 1-based line
/// (or row) number in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Validated set of ticker symbols (uppercase A-Z, length 1-5).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TickerLexicon {
    symbols: BTreeSet<String>,
}

impl TickerLexicon {
    pub fn new<I, S>(symbols: I) -> Result<TickerLexicon, CorpusError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for sym in symbols {
            let sym = sym.into();
            if sym.is_empty() || sym.len() > 5 {
                return Err(CorpusError::InvalidTicker {
                    symbol: sym,
                    reason: "length must be 1-5".into(),
                });
            }
            if !sym.bytes().all(|b| b.is_ascii_uppercase()) {
                return Err(CorpusError::InvalidTicker {
                    symbol: sym,
                    reason: "must be uppercase A-Z".into(),
                });
            }
            set.insert(sym);
        }
        if set.is_empty() {
            return Err(CorpusError::EmptyLexicon);
        }
        Ok(TickerLexicon { symbols: set })
    }

    /// Parses a comma-separated list such as `GME,AMC,SPY`.
    pub fn parse(list: &str) -> Result<TickerLexicon, CorpusError> {
        TickerLexicon::new(list.split(',').map(|s| s.trim().to_string()))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(|s| s.as_str())
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.symbols.contains(symbol)
    }
}

/// Returns every lexicon symbol mentioned in `text`.
///
/// A symbol `S` matches iff the text contains `$S` (case-insensitive after
/// the `$`) or `S` as a whole uppercase token bounded by non-alphanumerics.
/// Bare lowercase words never match, so common words shadowing short
/// tickers ("a", "it") stay out of the result.
pub fn detect_tickers(text: &str, lexicon: &TickerLexicon) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    if text.is_empty() {
        return found;
    }
    let lower = text.to_ascii_lowercase();
    let bytes = text.as_bytes();
    for symbol in lexicon.symbols() {
        if contains_cashtag(&lower, symbol) || contains_bare_token(bytes, symbol) {
            found.insert(symbol.to_string());
        }
    }
    found
}

fn contains_cashtag(lower_text: &str, symbol: &str) -> bool {
    let needle = format!("${}", symbol.to_ascii_lowercase());
    lower_text.contains(&needle)
}

fn contains_bare_token(text: &[u8], symbol: &str) -> bool {
    let sym = symbol.as_bytes();
    let mut start = 0;
    while start + sym.len() <= text.len() {
        match find_subslice(&text[start..], sym) {
            Some(offset) => {
                let at = start + offset;
                let before_ok = at == 0 || !text[at - 1].is_ascii_alphanumeric();
                let end = at + sym.len();
                let after_ok = end == text.len() || !text[end].is_ascii_alphanumeric();
                if before_ok && after_ok {
                    return true;
                }
                start = at + 1;
            }
            None => return false,
        }
    }
    false
}

fn find_subslice(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack
        .windows(needle.len())
        .position(|window| window == needle)
}

/// Input encoding of a document corpus stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One JSON object per line: `{"id":..,"ts":..,"kind":..,"body":..}`.
    Jsonl,
    /// CSV with header `id,ts,kind,body`.
    Csv,
}

#[derive(Debug, Deserialize, Serialize)]
struct RawDocRecord {
    id: String,
    ts: String,
    kind: String,
    body: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tickers: Option<Vec<String>>,
}

/// Result of a corpus parse: documents in input order plus per-record
/// diagnostics for the records that were rejected.
#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub documents: Vec<Document>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses a document corpus, populating ticker mentions via
/// [`detect_tickers`].
///
/// Malformed records and duplicate ids are reported as diagnostics and
/// skipped; the remaining documents keep their input order.
pub fn parse_corpus<R: BufRead>(
    source: R,
    format: CorpusFormat,
    lexicon: &TickerLexicon,
) -> Result<ParseOutcome, CorpusError> {
    match format {
        CorpusFormat::Jsonl => parse_corpus_jsonl(source, lexicon),
        CorpusFormat::Csv => parse_corpus_csv(source, lexicon),
    }
}

fn parse_corpus_jsonl<R: BufRead>(
    source: R,
    lexicon: &TickerLexicon,
) -> Result<ParseOutcome, CorpusError> {
    let mut out = ParseOutcome::default();
    let mut seen = HashMap::new();
    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RawDocRecord>(&line) {
            Ok(raw) => finish_record(raw, line_no, lexicon, &mut seen, &mut out),
            Err(e) => out.diagnostics.push(Diagnostic {
                line: line_no,
                message: format!("malformed record: {e}"),
            }),
        }
    }
    Ok(out)
}

fn parse_corpus_csv<R: BufRead>(
    source: R,
    lexicon: &TickerLexicon,
) -> Result<ParseOutcome, CorpusError> {
    let mut out = ParseOutcome::default();
    let mut seen = HashMap::new();
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    for (idx, record) in reader.deserialize::<RawDocRecord>().enumerate() {
        // Row 1 is the header, so data rows start at line 2.
        let line_no = idx + 2;
        match record {
            Ok(raw) => finish_record(raw, line_no, lexicon, &mut seen, &mut out),
            Err(e) => out.diagnostics.push(Diagnostic {
                line: line_no,
                message: format!("malformed record: {e}"),
            }),
        }
    }
    Ok(out)
}

fn finish_record(
    raw: RawDocRecord,
    line_no: usize,
    lexicon: &TickerLexicon,
    seen: &mut HashMap<String, usize>,
    out: &mut ParseOutcome,
) {
    if raw.id.is_empty() {
        out.diagnostics.push(Diagnostic {
            line: line_no,
            message: "empty id".into(),
        });
        return;
    }
    if let Some(first) = seen.get(&raw.id) {
        out.diagnostics.push(Diagnostic {
            line: line_no,
            message: format!("duplicate id {:?} (first seen on line {first})", raw.id),
        });
        return;
    }
    let timestamp = match DateTime::parse_from_rfc3339(&raw.ts) {
        Ok(t) => t.with_timezone(&Utc).trunc_subsecs(0),
        Err(e) => {
            out.diagnostics.push(Diagnostic {
                line: line_no,
                message: format!("bad timestamp {:?}: {e}", raw.ts),
            });
            return;
        }
    };
    let kind = match raw.kind.as_str() {
        "post" => DocKind::Post,
        "comment" => DocKind::Comment,
        other => {
            out.diagnostics.push(Diagnostic {
                line: line_no,
                message: format!("unknown kind {other:?} (expected post|comment)"),
            });
            return;
        }
    };
    let tickers = detect_tickers(&raw.body, lexicon);
    seen.insert(raw.id.clone(), line_no);
    out.documents.push(Document {
        id: raw.id,
        timestamp,
        kind,
        body: raw.body,
        tickers,
    });
}

use chrono::SubsecRound;

/// Serializes documents back to the canonical JSONL corpus format.
///
/// Parsing the output reproduces the documents exactly (the detected
/// `tickers` field is informational; the parser recomputes it).
pub fn write_corpus_jsonl<W: Write>(docs: &[Document], mut writer: W) -> Result<(), CorpusError> {
    for doc in docs {
        let raw = RawDocRecord {
            id: doc.id.clone(),
            ts: doc.timestamp.to_rfc3339_opts(SecondsFormat::Secs, true),
            kind: doc.kind.as_str().to_string(),
            body: doc.body.clone(),
            tickers: Some(doc.tickers.iter().cloned().collect()),
        };
        serde_json::to_writer(&mut writer, &raw).map_err(std::io::Error::other)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Result of loading a labeled dataset.
#[derive(Debug, Default)]
pub struct LoadOutcome {
    pub samples: Vec<LabeledSample>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Loads a labeled dataset from CSV with header `id,text,label[,ann1,ann2,...]`.
///
/// Annotation columns are optional. When a row carries two or more
/// annotations, agreement is `Unanimous` iff they all match; rows without
/// annotation history are marked `Resolved`. Rows with unknown labels,
/// missing text, or exactly one annotation become diagnostics.
pub fn load_labeled_dataset(path: &Path) -> Result<LoadOutcome, CorpusError> {
    let file = std::fs::File::open(path)?;
    load_labeled_dataset_from(file, &path.display().to_string())
}

/// Same as [`load_labeled_dataset`] but over any reader.
pub fn load_labeled_dataset_from<R: std::io::Read>(
    source: R,
    source_name: &str,
) -> Result<LoadOutcome, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let mut cols = headers.iter();
    match (cols.next(), cols.next(), cols.next()) {
        (Some("id"), Some("text"), Some("label")) => {}
        _ => {
            return Err(CorpusError::BadHeader {
                path: source_name.to_string(),
                reason: "expected columns id,text,label[,ann...]".into(),
            })
        }
    }

    let mut out = LoadOutcome::default();
    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                out.diagnostics.push(Diagnostic {
                    line: line_no,
                    message: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let id = record.get(0).unwrap_or("").to_string();
        let text = record.get(1).unwrap_or("").to_string();
        let label_str = record.get(2).unwrap_or("");
        if id.is_empty() {
            out.diagnostics.push(Diagnostic {
                line: line_no,
                message: "missing id".into(),
            });
            continue;
        }
        if text.is_empty() {
            out.diagnostics.push(Diagnostic {
                line: line_no,
                message: "missing text".into(),
            });
            continue;
        }
        let gold = match SentimentLabel::parse(label_str) {
            Some(l) => l,
            None => {
                out.diagnostics.push(Diagnostic {
                    line: line_no,
                    message: format!("unknown label {label_str:?}"),
                });
                continue;
            }
        };
        let mut round1 = Vec::new();
        let mut bad_ann = false;
        for cell in record.iter().skip(3) {
            if cell.is_empty() {
                continue;
            }
            match SentimentLabel::parse(cell) {
                Some(l) => round1.push(l),
                None => {
                    out.diagnostics.push(Diagnostic {
                        line: line_no,
                        message: format!("unknown annotation label {cell:?}"),
                    });
                    bad_ann = true;
                    break;
                }
            }
        }
        if bad_ann {
            continue;
        }
        if round1.len() == 1 {
            out.diagnostics.push(Diagnostic {
                line: line_no,
                message: "annotation history needs at least two entries".into(),
            });
            continue;
        }
        let agreement = if round1.len() >= 2 && round1.iter().all(|l| *l == round1[0]) {
            Agreement::Unanimous
        } else {
            Agreement::Resolved
        };
        out.samples.push(LabeledSample {
            id,
            text,
            gold,
            agreement,
            round1,
        });
    }
    Ok(out)
}

/// Writes samples in the `id,text,label[,ann...]` CSV format.
pub fn write_labeled_csv<W: Write>(
    samples: &[LabeledSample],
    writer: W,
) -> Result<(), CorpusError> {
    let max_anns = samples.iter().map(|s| s.round1.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "text".to_string(), "label".to_string()];
    for i in 0..max_anns {
        header.push(format!("ann{}", i + 1));
    }
    w.write_record(&header)?;
    for sample in samples {
        let mut row = vec![
            sample.id.clone(),
            sample.text.clone(),
            sample.gold.as_str().to_string(),
        ];
        for ann in &sample.round1 {
            row.push(ann.as_str().to_string());
        }
        row.resize(3 + max_anns, String::new());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Returns the unanimous subset, preserving order.
pub fn derive_all_agree(full: &[LabeledSample]) -> Vec<LabeledSample> {
    full.iter()
        .filter(|s| s.agreement == Agreement::Unanimous)
        .cloned()
        .collect()
}

/// Per-label fractions over a nonempty sample collection.
pub fn class_distribution(samples: &[LabeledSample]) -> Result<DatasetStats, CorpusError> {
    if samples.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    let mut counts = [0usize; 3];
    for sample in samples {
        counts[sample.gold.index()] += 1;
    }
    let total = samples.len();
    Ok(DatasetStats {
        total,
        positive: counts[0] as f64 / total as f64,
        negative: counts[1] as f64 / total as f64,
        neutral: counts[2] as f64 / total as f64,
    })
}

/// Raw annotation history for one sample, before label resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub id: String,
    pub text: String,
    /// Samples flagged irrelevant are dropped during resolution.
    pub relevant: bool,
    pub round1: Vec<SentimentLabel>,
    /// Extra annotations gathered to settle round-1 conflicts.
    pub resolution: Vec<SentimentLabel>,
}

/// Why a record could not be resolved to a labeled sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// No strict majority over all recorded annotations.
    UnresolvedTie,
    /// Fewer than two round-1 annotations.
    InsufficientAnnotations,
}

/// Result of [`resolve_labels`]: resolved samples plus explicit rejects.
#[derive(Debug, Default)]
pub struct ResolveOutcome {
    pub samples: Vec<LabeledSample>,
    pub rejects: Vec<(AnnotationRecord, RejectReason)>,
}

/// Derives gold labels from annotation rounds.
///
/// Irrelevant-flagged records are dropped. A record whose round-1
/// annotations all agree becomes a `Unanimous` sample; otherwise the gold
/// label is the strict majority over round-1 plus resolution annotations.
/// Ties go to the rejects list rather than being silently dropped.
pub fn resolve_labels(records: Vec<AnnotationRecord>) -> ResolveOutcome {
    let mut out = ResolveOutcome::default();
    for record in records {
        if !record.relevant {
            continue;
        }
        if record.round1.len() < 2 {
            out.rejects
                .push((record, RejectReason::InsufficientAnnotations));
            continue;
        }
        let unanimous = record.round1.iter().all(|l| *l == record.round1[0]);
        let (gold, agreement) = if unanimous {
            (record.round1[0], Agreement::Unanimous)
        } else {
            let mut counts = [0usize; 3];
            for l in record.round1.iter().chain(record.resolution.iter()) {
                counts[l.index()] += 1;
            }
            let best = *counts.iter().max().expect("three counts");
            let winners: Vec<usize> = (0..3).filter(|&i| counts[i] == best).collect();
            if winners.len() != 1 {
                out.rejects.push((record, RejectReason::UnresolvedTie));
                continue;
            }
            (SentimentLabel::ALL[winners[0]], Agreement::Resolved)
        };
        let mut round1 = record.round1;
        round1.extend(record.resolution);
        out.samples.push(LabeledSample {
            id: record.id,
            text: record.text,
            gold,
            agreement,
            round1,
        });
    }
    out
}
