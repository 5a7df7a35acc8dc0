//! Daily per-ticker sentiment indices.
//!
//! Two scoring methods convert per-document predictions into one score per
//! ticker per calendar day. The quantity method is the signed fraction
//! `(pos - neg) / (pos + neu + neg)` over the day's label counts, bounded
//! in [-1, 1]. The confidence method sums per-document contributions taken
//! from the class probability distribution: the winning class probability
//! signed by its polarity, with neutral documents signed by the
//! positive-versus-negative gap. The confidence sum is deliberately not
//! divided by the document count; a normalized variant is available behind
//! an explicit flag for cross-volume comparisons.
//!
//! Summation follows the fixed order (timestamp, document id), so scores
//! are bit-identical across runs and thread counts.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, SentimentLabel};
use crate::models::Prediction;
use crate::tz::ExchangeTz;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(
        "document {doc_id} has no probability distribution (required by the confidence method)"
    )]
    MissingProbs { doc_id: String },
    #[error("no prediction supplied for document {doc_id}")]
    MissingPrediction { doc_id: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad index row {line}: {reason}")]
    BadIndexRow { line: usize, reason: String },
    #[error("unknown score method {0:?} (expected quantss or csbs)")]
    UnknownMethod(String),
}

/// Index construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreMethod {
    /// Quantity-based signed fraction of the day's label counts.
    Quantss,
    /// Confidence-score-based signed probability sum.
    Csbs,
}

impl ScoreMethod {
    pub const ALL: [ScoreMethod; 2] = [ScoreMethod::Quantss, ScoreMethod::Csbs];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMethod::Quantss => "quantss",
            ScoreMethod::Csbs => "csbs",
        }
    }
}

impl fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreMethod {
    type Err = ScoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quantss" => Ok(ScoreMethod::Quantss),
            "csbs" => Ok(ScoreMethod::Csbs),
            other => Err(ScoreError::UnknownMethod(other.to_string())),
        }
    }
}

/// Label counts for one ticker-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DailySentimentCounts {
    pub pos: usize,
    pub neg: usize,
    pub neu: usize,
}

impl DailySentimentCounts {
    pub fn total(&self) -> usize {
        self.pos + self.neg + self.neu
    }

    pub fn add(&mut self, label: SentimentLabel) {
        match label {
            SentimentLabel::Positive => self.pos += 1,
            SentimentLabel::Negative => self.neg += 1,
            SentimentLabel::Neutral => self.neu += 1,
        }
    }
}

/// One ticker-day sentiment score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySentimentIndex {
    pub ticker: String,
    pub date: NaiveDate,
    pub method: ScoreMethod,
    pub score: f64,
    pub n_docs: usize,
    /// True when no document fell on this day; the score is then 0.
    pub missing: bool,
}

/// Quantity score over one day's label counts: `(pos - neg) / total`.
/// A day with no documents scores 0 and is flagged missing.
pub fn quantss(ticker: &str, date: NaiveDate, counts: DailySentimentCounts) -> DailySentimentIndex {
    let total = counts.total();
    if total == 0 {
        return DailySentimentIndex {
            ticker: ticker.to_string(),
            date,
            method: ScoreMethod::Quantss,
            score: 0.0,
            n_docs: 0,
            missing: true,
        };
    }
    let score = (counts.pos as f64 - counts.neg as f64) / total as f64;
    DailySentimentIndex {
        ticker: ticker.to_string(),
        date,
        method: ScoreMethod::Quantss,
        score,
        n_docs: total,
        missing: false,
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Confidence score for one day: per document, add the positive
/// probability if positive wins, subtract the negative probability if
/// negative wins, and otherwise add the neutral probability signed by the
/// positive-minus-negative gap (zero gap contributes nothing).
///
/// Documents are folded in ascending (timestamp, id) order. Every
/// prediction must carry a probability distribution.
pub fn csbs_day(
    items: &[(&Document, &Prediction)],
    ticker: &str,
    date: NaiveDate,
) -> Result<DailySentimentIndex, ScoreError> {
    if items.is_empty() {
        return Ok(DailySentimentIndex {
            ticker: ticker.to_string(),
            date,
            method: ScoreMethod::Csbs,
            score: 0.0,
            n_docs: 0,
            missing: true,
        });
    }
    let mut ordered: Vec<&(&Document, &Prediction)> = items.iter().collect();
    ordered.sort_by(|a, b| (a.0.timestamp, a.0.id.as_str()).cmp(&(b.0.timestamp, b.0.id.as_str())));
    let mut score = 0.0f64;
    for (doc, prediction) in ordered {
        let probs = prediction.probs.ok_or_else(|| ScoreError::MissingProbs {
            doc_id: doc.id.clone(),
        })?;
        score += match probs.argmax() {
            SentimentLabel::Positive => probs.p_pos(),
            SentimentLabel::Negative => -probs.p_neg(),
            SentimentLabel::Neutral => sign(probs.p_pos() - probs.p_neg()) * probs.p_neu(),
        };
    }
    Ok(DailySentimentIndex {
        ticker: ticker.to_string(),
        date,
        method: ScoreMethod::Csbs,
        score,
        n_docs: items.len(),
        missing: false,
    })
}

/// Non-standard variant: the confidence score divided by the document
/// count, for comparing days with very different volumes.
pub fn csbs_day_normalized(
    items: &[(&Document, &Prediction)],
    ticker: &str,
    date: NaiveDate,
) -> Result<DailySentimentIndex, ScoreError> {
    let mut index = csbs_day(items, ticker, date)?;
    if index.n_docs > 0 {
        index.score /= index.n_docs as f64;
    }
    Ok(index)
}

/// Builds one index entry per calendar date in `range` (inclusive) for one
/// ticker. Documents are bucketed by their timestamp's calendar day in
/// `tz`; days without documents are emitted with the missing flag set.
///
/// Every document that mentions the ticker inside the range must have a
/// prediction (matched by document id); predictions for other documents
/// are ignored.
pub fn build_index_series(
    docs: &[Document],
    predictions: &[Prediction],
    ticker: &str,
    range: (NaiveDate, NaiveDate),
    method: ScoreMethod,
    tz: ExchangeTz,
) -> Result<Vec<DailySentimentIndex>, ScoreError> {
    let (start, end) = range;
    if start > end {
        return Ok(Vec::new());
    }
    let by_id: BTreeMap<&str, &Prediction> =
        predictions.iter().map(|p| (p.doc_id.as_str(), p)).collect();

    let mut buckets: BTreeMap<NaiveDate, Vec<(&Document, &Prediction)>> = BTreeMap::new();
    for doc in docs {
        if !doc.tickers.contains(ticker) {
            continue;
        }
        let date = tz.local_date(doc.timestamp);
        if date < start || date > end {
            continue;
        }
        let prediction =
            by_id
                .get(doc.id.as_str())
                .ok_or_else(|| ScoreError::MissingPrediction {
                    doc_id: doc.id.clone(),
                })?;
        buckets.entry(date).or_default().push((doc, prediction));
    }

    let mut series = Vec::new();
    let mut date = start;
    while date <= end {
        let items = buckets.get(&date).map(|v| v.as_slice()).unwrap_or(&[]);
        let entry = match method {
            ScoreMethod::Quantss => {
                let mut counts = DailySentimentCounts::default();
                for (_, prediction) in items {
                    counts.add(prediction.label);
                }
                quantss(ticker, date, counts)
            }
            ScoreMethod::Csbs => csbs_day(items, ticker, date)?,
        };
        series.push(entry);
        date = date.succ_opt().expect("date range within calendar bounds");
    }
    Ok(series)
}

/// Writes an index series as CSV: `ticker,date,method,score,n_docs,missing`.
pub fn write_index_csv<W: Write>(
    series: &[DailySentimentIndex],
    writer: W,
) -> Result<(), ScoreError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ticker", "date", "method", "score", "n_docs", "missing"])?;
    for entry in series {
        w.write_record([
            entry.ticker.as_str(),
            &entry.date.to_string(),
            entry.method.as_str(),
            &entry.score.to_string(),
            &entry.n_docs.to_string(),
            &entry.missing.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an index series written by [`write_index_csv`].
pub fn read_index_csv<R: std::io::Read>(reader: R) -> Result<Vec<DailySentimentIndex>, ScoreError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut series = Vec::new();
    for (idx, record) in r.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let date = field(1)
            .parse::<NaiveDate>()
            .map_err(|e| ScoreError::BadIndexRow {
                line,
                reason: format!("bad date: {e}"),
            })?;
        let method = field(2).parse::<ScoreMethod>()?;
        let score = field(3)
            .parse::<f64>()
            .map_err(|e| ScoreError::BadIndexRow {
                line,
                reason: format!("bad score: {e}"),
            })?;
        let n_docs = field(4)
            .parse::<usize>()
            .map_err(|e| ScoreError::BadIndexRow {
                line,
                reason: format!("bad n_docs: {e}"),
            })?;
        let missing = field(5)
            .parse::<bool>()
            .map_err(|e| ScoreError::BadIndexRow {
                line,
                reason: format!("bad missing flag: {e}"),
            })?;
        series.push(DailySentimentIndex {
            ticker: field(0).to_string(),
            date,
            method,
            score,
            n_docs,
            missing,
        });
    }
    Ok(series)
}
