//! Benchmark harness: accuracy evaluation, prompt-variant gains, ablation
//! curves, few-shot comparisons, and report tables.
//!
//! Evaluation renders every sample with one prompt configuration, asks the
//! model, and compares parsed labels to gold. Unparseable model output is
//! never dropped: it counts as incorrect (keeping accuracy denominators
//! fixed across prompt variants) and is tracked in a separate confusion
//! column for audit. Classification may run concurrently up to the
//! model's in-flight bound; aggregation is an order-independent fold, so
//! reports are identical for any thread count.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{LabeledSample, SentimentLabel};
use crate::models::{classify_generative, GenerativeModel, ModelError};
use crate::prompting::{
    ComponentSet, IdentifierTerm, InstructionSpec, PromptError, PromptFamily, PromptSpec,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty dataset")]
    EmptyDataset,
    #[error("cannot summarize an empty gain collection")]
    EmptyGains,
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("evaluation aborted after {completed}/{total} samples: {source}")]
    Aborted {
        completed: usize,
        total: usize,
        source: ModelError,
        /// Progress survives here when a checkpoint was configured.
        checkpoint: Option<PathBuf>,
    },
    #[error("checkpoint i/o error: {0}")]
    Checkpoint(#[from] std::io::Error),
    #[error("bad checkpoint line {line}: {reason}")]
    CheckpointFormat { line: usize, reason: String },
}

/// Which slice of the labeled data a report covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetTag {
    AllAgree,
    Full,
    Custom(String),
}

impl std::fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetTag::AllAgree => f.write_str("all_agree"),
            DatasetTag::Full => f.write_str("full"),
            DatasetTag::Custom(name) => f.write_str(name),
        }
    }
}

/// Classification outcome for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Label(SentimentLabel),
    Unparseable,
}

impl Outcome {
    fn as_str(&self) -> &'static str {
        match self {
            Outcome::Label(l) => l.as_str(),
            Outcome::Unparseable => "unparseable",
        }
    }

    fn parse(s: &str) -> Option<Outcome> {
        if s == "unparseable" {
            return Some(Outcome::Unparseable);
        }
        SentimentLabel::parse(s).map(Outcome::Label)
    }

    fn column(&self) -> usize {
        match self {
            Outcome::Label(l) => l.index(),
            Outcome::Unparseable => 3,
        }
    }
}

/// Gold-by-outcome counts. Rows are the three gold labels; columns are the
/// three predicted labels plus an unparseable column, so every evaluated
/// sample lands in exactly one cell and the entries sum to n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    counts: [[usize; 4]; 3],
}

impl Confusion {
    pub fn record(&mut self, gold: SentimentLabel, outcome: Outcome) {
        self.counts[gold.index()][outcome.column()] += 1;
    }

    pub fn count(&self, gold: SentimentLabel, outcome: Outcome) -> usize {
        self.counts[gold.index()][outcome.column()]
    }

    pub fn row_sum(&self, gold: SentimentLabel) -> usize {
        self.counts[gold.index()].iter().sum()
    }

    pub fn total(&self) -> usize {
        SentimentLabel::ALL.iter().map(|l| self.row_sum(*l)).sum()
    }
}

/// One evaluation run's results.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub family: PromptFamily,
    pub identifier: IdentifierTerm,
    pub dataset: DatasetTag,
    pub n: usize,
    pub correct: usize,
    /// Fraction in [0, 1]; report emitters render percentages.
    pub accuracy: f64,
    pub confusion: Confusion,
    pub unparseable: usize,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    id: String,
    outcome: String,
}

/// Evaluation driver with optional concurrency override and per-sample
/// checkpointing.
///
/// With a checkpoint path set, each classified sample is appended to the
/// file as it completes; a rerun loads the file, skips finished samples,
/// and produces the same report an uninterrupted run would have. Use a
/// distinct path per (prompt family, identifier, dataset) combination.
#[derive(Debug, Default, Clone)]
pub struct Evaluator {
    pub concurrency: Option<usize>,
    pub checkpoint: Option<PathBuf>,
}

impl Evaluator {
    pub fn new() -> Evaluator {
        Evaluator::default()
    }

    pub fn with_checkpoint(path: impl Into<PathBuf>) -> Evaluator {
        Evaluator {
            concurrency: None,
            checkpoint: Some(path.into()),
        }
    }

    pub fn evaluate(
        &self,
        model: &dyn GenerativeModel,
        dataset: &[LabeledSample],
        prompt_spec: &PromptSpec,
        instruction_spec: &InstructionSpec,
        dataset_tag: DatasetTag,
    ) -> Result<EvalReport, EvalError> {
        if dataset.is_empty() {
            return Err(EvalError::EmptyDataset);
        }

        let mut outcomes: Vec<Option<Outcome>> = vec![None; dataset.len()];
        if let Some(path) = &self.checkpoint {
            let done = load_checkpoint(path)?;
            for (i, sample) in dataset.iter().enumerate() {
                if let Some(outcome) = done.get(sample.id.as_str()) {
                    outcomes[i] = Some(*outcome);
                }
            }
        }

        let pending: Vec<usize> = (0..dataset.len())
            .filter(|i| outcomes[*i].is_none())
            .collect();
        if !pending.is_empty() {
            let mut prompts = Vec::with_capacity(pending.len());
            for &i in &pending {
                prompts.push(prompt_spec.render(&dataset[i].text, instruction_spec)?);
            }
            let sink = match &self.checkpoint {
                Some(path) => Some(Mutex::new(
                    OpenOptions::new().create(true).append(true).open(path)?,
                )),
                None => None,
            };
            let concurrency = self
                .concurrency
                .unwrap_or_else(|| model.concurrency_hint())
                .clamp(1, pending.len());

            let next = AtomicUsize::new(0);
            let stop = AtomicBool::new(false);
            let fresh: Mutex<Vec<Option<Outcome>>> = Mutex::new(vec![None; pending.len()]);
            let fatal: Mutex<Option<ModelError>> = Mutex::new(None);

            std::thread::scope(|scope| {
                for _ in 0..concurrency {
                    scope.spawn(|| loop {
                        if stop.load(Ordering::Relaxed) {
                            break;
                        }
                        let slot = next.fetch_add(1, Ordering::Relaxed);
                        if slot >= pending.len() {
                            break;
                        }
                        let sample = &dataset[pending[slot]];
                        let outcome = match classify_generative(model, &prompts[slot], &sample.id) {
                            Ok(prediction) => Outcome::Label(prediction.label),
                            Err(ModelError::Unparseable { .. }) => Outcome::Unparseable,
                            Err(e) => {
                                let mut guard = fatal.lock().expect("fatal lock");
                                if guard.is_none() {
                                    *guard = Some(e);
                                }
                                stop.store(true, Ordering::Relaxed);
                                break;
                            }
                        };
                        fresh.lock().expect("result lock")[slot] = Some(outcome);
                        if let Some(sink) = &sink {
                            let record = CheckpointRecord {
                                id: sample.id.clone(),
                                outcome: outcome.as_str().to_string(),
                            };
                            let mut file = sink.lock().expect("checkpoint lock");
                            // Best effort: a failed checkpoint write must
                            // not lose an otherwise good outcome.
                            let _ =
                                serde_json::to_string(&record).map(|line| writeln!(file, "{line}"));
                            let _ = file.flush();
                        }
                    });
                }
            });

            let fresh = fresh.into_inner().expect("result lock");
            for (slot, outcome) in fresh.into_iter().enumerate() {
                outcomes[pending[slot]] = outcome;
            }
            if let Some(source) = fatal.into_inner().expect("fatal lock") {
                return Err(EvalError::Aborted {
                    completed: outcomes.iter().filter(|o| o.is_some()).count(),
                    total: dataset.len(),
                    source,
                    checkpoint: self.checkpoint.clone(),
                });
            }
        }

        let mut confusion = Confusion::default();
        let mut correct = 0;
        let mut unparseable = 0;
        for (sample, outcome) in dataset.iter().zip(&outcomes) {
            let outcome = outcome.expect("all samples classified");
            confusion.record(sample.gold, outcome);
            match outcome {
                Outcome::Label(label) if label == sample.gold => correct += 1,
                Outcome::Unparseable => unparseable += 1,
                _ => {}
            }
        }
        Ok(EvalReport {
            family: prompt_spec.family(),
            identifier: prompt_spec.identifier(),
            dataset: dataset_tag,
            n: dataset.len(),
            correct,
            accuracy: correct as f64 / dataset.len() as f64,
            confusion,
            unparseable,
        })
    }
}

fn load_checkpoint(path: &Path) -> Result<HashMap<String, Outcome>, EvalError> {
    let mut done = HashMap::new();
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(done),
        Err(e) => return Err(e.into()),
    };
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CheckpointRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::CheckpointFormat {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        let outcome =
            Outcome::parse(&record.outcome).ok_or_else(|| EvalError::CheckpointFormat {
                line: idx + 1,
                reason: format!("unknown outcome {:?}", record.outcome),
            })?;
        done.insert(record.id, outcome);
    }
    Ok(done)
}

/// Convenience wrapper over [`Evaluator::evaluate`] with defaults.
pub fn evaluate(
    model: &dyn GenerativeModel,
    dataset: &[LabeledSample],
    prompt_spec: &PromptSpec,
    instruction_spec: &InstructionSpec,
    dataset_tag: DatasetTag,
) -> Result<EvalReport, EvalError> {
    Evaluator::new().evaluate(model, dataset, prompt_spec, instruction_spec, dataset_tag)
}

/// Base-versus-annotator accuracy pair, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEntry {
    /// Base prompt accuracy in percent.
    pub base: f64,
    /// Annotator prompt accuracy in percent.
    pub aiap: f64,
    /// Percentage-point gain, aiap minus base, unrounded.
    pub gain: f64,
}

impl GainEntry {
    pub fn from_accuracies(base_pct: f64, aiap_pct: f64) -> GainEntry {
        GainEntry {
            base: base_pct,
            aiap: aiap_pct,
            gain: aiap_pct - base_pct,
        }
    }
}

/// Evaluates the base prompt and the full annotator prompt on the same
/// dataset and returns the accuracy pair with its gain.
pub fn compare_prompts(
    model: &dyn GenerativeModel,
    dataset: &[LabeledSample],
    identifier: IdentifierTerm,
    instruction_spec: &InstructionSpec,
    dataset_tag: DatasetTag,
) -> Result<GainEntry, EvalError> {
    let base = evaluate(
        model,
        dataset,
        &PromptSpec::base(identifier),
        instruction_spec,
        dataset_tag.clone(),
    )?;
    let aiap = evaluate(
        model,
        dataset,
        &PromptSpec::aiap(identifier, ComponentSet::FULL)?,
        instruction_spec,
        dataset_tag,
    )?;
    Ok(GainEntry::from_accuracies(
        base.accuracy * 100.0,
        aiap.accuracy * 100.0,
    ))
}

/// Accuracies (fractions) for the cumulative component ladder
/// `[base, D, D+G, D+G+E]`.
pub fn ablation_curve(
    model: &dyn GenerativeModel,
    dataset: &[LabeledSample],
    identifier: IdentifierTerm,
    instruction_spec: &InstructionSpec,
    dataset_tag: DatasetTag,
) -> Result<[f64; 4], EvalError> {
    let mut curve = [0.0; 4];
    curve[0] = evaluate(
        model,
        dataset,
        &PromptSpec::base(identifier),
        instruction_spec,
        dataset_tag.clone(),
    )?
    .accuracy;
    for (i, components) in ComponentSet::ABLATION.iter().enumerate() {
        curve[i + 1] = evaluate(
            model,
            dataset,
            &PromptSpec::aiap(identifier, *components)?,
            instruction_spec,
            dataset_tag.clone(),
        )?
        .accuracy;
    }
    Ok(curve)
}

/// Accuracies (fractions) for `[base, 1-shot, 2-shot, 3-shot, full aiap]`.
/// Shots come from the instruction's per-label examples in the fixed
/// order positive, negative, neutral, truncated to k.
#[allow(clippy::needless_range_loop)]
pub fn few_shot_table(
    model: &dyn GenerativeModel,
    dataset: &[LabeledSample],
    identifier: IdentifierTerm,
    instruction_spec: &InstructionSpec,
    dataset_tag: DatasetTag,
) -> Result<[f64; 5], EvalError> {
    let mut row = [0.0; 5];
    row[0] = evaluate(
        model,
        dataset,
        &PromptSpec::base(identifier),
        instruction_spec,
        dataset_tag.clone(),
    )?
    .accuracy;
    for k in 1..=3 {
        row[k] = evaluate(
            model,
            dataset,
            &PromptSpec::few_shot(identifier, instruction_spec.shots(k))?,
            instruction_spec,
            dataset_tag.clone(),
        )?
        .accuracy;
    }
    row[4] = evaluate(
        model,
        dataset,
        &PromptSpec::aiap(identifier, ComponentSet::FULL)?,
        instruction_spec,
        dataset_tag,
    )?
    .accuracy;
    Ok(row)
}

/// Mean and maximum over a gain collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSummary {
    pub mean: f64,
    pub max: f64,
}

pub fn mean_gain(entries: &[GainEntry]) -> Result<GainSummary, EvalError> {
    if entries.is_empty() {
        return Err(EvalError::EmptyGains);
    }
    let mean = entries.iter().map(|e| e.gain).sum::<f64>() / entries.len() as f64;
    let max = entries
        .iter()
        .map(|e| e.gain)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GainSummary { mean, max })
}

// ---------------------------------------------------------------------------
// Report emitters
// ---------------------------------------------------------------------------

/// One row of a base-versus-annotator gain table.
#[derive(Debug, Clone)]
pub struct GainRow {
    pub model: String,
    pub dataset: String,
    pub identifier: IdentifierTerm,
    pub entry: GainEntry,
}

pub fn gain_table_markdown(rows: &[GainRow]) -> String {
    let mut out = String::from("| Model | Dataset | Identifier | Base-Prompt | AIAP | Gain |\n");
    out.push_str("|---|---|---|---:|---:|---:|\n");
    for row in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {:.2} | {:.2} | {:+.2} |\n",
            row.model, row.dataset, row.identifier, row.entry.base, row.entry.aiap, row.entry.gain
        ));
    }
    out
}

pub fn gain_table_csv(rows: &[GainRow]) -> String {
    let mut out = String::from("model,dataset,identifier,base,aiap,gain\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{:.2},{:.2},{:.2}\n",
            row.model, row.dataset, row.identifier, row.entry.base, row.entry.aiap, row.entry.gain
        ));
    }
    out
}

/// One row of a few-shot comparison table (values are fractions).
#[derive(Debug, Clone)]
pub struct FewShotRow {
    pub dataset: String,
    pub identifier: IdentifierTerm,
    pub values: [f64; 5],
}

pub fn few_shot_table_markdown(rows: &[FewShotRow]) -> String {
    let mut out = String::from("| Dataset | Identifier | BP | 1-S | 2-S | 3-S | AIAP |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---:|\n");
    for row in rows {
        let v = row.values;
        out.push_str(&format!(
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
            row.dataset,
            row.identifier,
            v[0] * 100.0,
            v[1] * 100.0,
            v[2] * 100.0,
            v[3] * 100.0,
            v[4] * 100.0
        ));
    }
    out.push_str("\nshot order: positive, negative, neutral (instruction examples, truncated to k)\n");
    out
}

pub fn few_shot_table_csv(rows: &[FewShotRow]) -> String {
    let mut out = String::from("dataset,identifier,bp,1s,2s,3s,aiap\n");
    for row in rows {
        let v = row.values;
        out.push_str(&format!(
            "{},{},{:.2},{:.2},{:.2},{:.2},{:.2}\n",
            row.dataset,
            row.identifier,
            v[0] * 100.0,
            v[1] * 100.0,
            v[2] * 100.0,
            v[3] * 100.0,
            v[4] * 100.0
        ));
    }
    out
}

/// One row of a component-ablation table (values are fractions).
#[derive(Debug, Clone)]
pub struct AblationRow {
    pub dataset: String,
    pub identifier: IdentifierTerm,
    pub values: [f64; 4],
}

pub fn ablation_table_markdown(rows: &[AblationRow]) -> String {
    let mut out = String::from("| Dataset | Identifier | Base | D | D+G | D+G+E |\n");
    out.push_str("|---|---|---:|---:|---:|---:|\n");
    for row in rows {
        let v = row.values;
        out.push_str(&format!(
            "| {} | {} | {:.2} | {:.2} | {:.2} | {:.2} |\n",
            row.dataset,
            row.identifier,
            v[0] * 100.0,
            v[1] * 100.0,
            v[2] * 100.0,
            v[3] * 100.0
        ));
    }
    out
}

pub fn ablation_table_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("dataset,identifier,base,d,dg,dge\n");
    for row in rows {
        let v = row.values;
        out.push_str(&format!(
            "{},{},{:.2},{:.2},{:.2},{:.2}\n",
            row.dataset,
            row.identifier,
            v[0] * 100.0,
            v[1] * 100.0,
            v[2] * 100.0,
            v[3] * 100.0
        ));
    }
    out
}

pub fn eval_report_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("family,identifier,dataset,n,correct,accuracy,unparseable\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{:.2},{}\n",
            r.family,
            r.identifier,
            r.dataset,
            r.n,
            r.correct,
            r.accuracy * 100.0,
            r.unparseable
        ));
    }
    out
}

pub fn eval_report_markdown(reports: &[EvalReport]) -> String {
    let mut out =
        String::from("| Family | Identifier | Dataset | n | Correct | Accuracy | Unparseable |\n");
    out.push_str("|---|---|---|---:|---:|---:|---:|\n");
    for r in reports {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {:.2} | {} |\n",
            r.family,
            r.identifier,
            r.dataset,
            r.n,
            r.correct,
            r.accuracy * 100.0,
            r.unparseable
        ));
    }
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "### Confusion: {} / {} / {}\n\n",
            r.family, r.identifier, r.dataset
        ));
        out.push_str("| gold \\ predicted | positive | negative | neutral | unparseable |\n");
        out.push_str("|---|---:|---:|---:|---:|\n");
        for gold in SentimentLabel::ALL {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} |\n",
                gold,
                r.confusion
                    .count(gold, Outcome::Label(SentimentLabel::Positive)),
                r.confusion
                    .count(gold, Outcome::Label(SentimentLabel::Negative)),
                r.confusion
                    .count(gold, Outcome::Label(SentimentLabel::Neutral)),
                r.confusion.count(gold, Outcome::Unparseable),
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Agreement;
    use crate::models::FixtureModel;

    fn sample(i: usize, gold: SentimentLabel) -> LabeledSample {
        LabeledSample {
            id: format!("s{i}"),
            text: format!("sample number {i}"),
            gold,
            agreement: Agreement::Resolved,
            round1: vec![],
        }
    }

    fn tiny_dataset() -> Vec<LabeledSample> {
        (0..10)
            .map(|i| sample(i, SentimentLabel::ALL[i % 3]))
            .collect()
    }

    /// Fixture that answers the gold label for every rendering of the
    /// dataset under any prompt family.
    fn oracle_model(dataset: &[LabeledSample]) -> FixtureModel {
        let gold_by_text: HashMap<String, SentimentLabel> =
            dataset.iter().map(|s| (s.text.clone(), s.gold)).collect();
        FixtureModel::from_fn(move |prompt| {
            let input = prompt
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Input: "))
                .expect("prompt has an input line");
            Ok(gold_by_text
                .get(input)
                .map(|l| l.as_str().to_string())
                .expect("input text known"))
        })
    }

    #[test]
    fn oracle_model_scores_perfectly_with_diagonal_confusion() {
        let dataset = tiny_dataset();
        let model = oracle_model(&dataset);
        let report = evaluate(
            &model,
            &dataset,
            &PromptSpec::base(IdentifierTerm::Input),
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.correct, report.n);
        assert_eq!(report.unparseable, 0);
        for gold in SentimentLabel::ALL {
            assert_eq!(
                report.confusion.count(gold, Outcome::Label(gold)),
                report.confusion.row_sum(gold)
            );
        }
    }

    #[test]
    fn seven_of_ten_correct() {
        let dataset = tiny_dataset();
        // Answer gold for samples 0..7, the wrong label afterwards.
        let gold: HashMap<String, SentimentLabel> =
            dataset.iter().map(|s| (s.text.clone(), s.gold)).collect();
        let model = FixtureModel::from_fn(move |prompt| {
            let input = prompt
                .lines()
                .find_map(|l| l.strip_prefix("Input: "))
                .unwrap();
            let i: usize = input.rsplit(' ').next().unwrap().parse().unwrap();
            let g = gold[input];
            let reply = if i < 7 {
                g
            } else {
                match g {
                    SentimentLabel::Positive => SentimentLabel::Negative,
                    _ => SentimentLabel::Positive,
                }
            };
            Ok(reply.as_str().to_string())
        });
        let report = evaluate(
            &model,
            &dataset,
            &PromptSpec::base(IdentifierTerm::Input),
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(report.correct, 7);
        assert!((report.accuracy - 0.7).abs() < 1e-12);
        assert_eq!(report.confusion.total(), 10);
    }

    #[test]
    fn unparseable_counts_as_incorrect_in_fourth_column() {
        let dataset = tiny_dataset();
        let model = FixtureModel::constant("eh, hard to say");
        let report = evaluate(
            &model,
            &dataset,
            &PromptSpec::base(IdentifierTerm::Input),
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(report.unparseable, 10);
        let unparseable_total: usize = SentimentLabel::ALL
            .iter()
            .map(|g| report.confusion.count(*g, Outcome::Unparseable))
            .sum();
        assert_eq!(unparseable_total, 10);
        assert_eq!(report.confusion.total(), 10);
    }

    #[test]
    fn empty_dataset_is_error() {
        let model = FixtureModel::constant("neutral");
        assert!(matches!(
            evaluate(
                &model,
                &[],
                &PromptSpec::base(IdentifierTerm::Input),
                InstructionSpec::bundled(),
                DatasetTag::Full,
            ),
            Err(EvalError::EmptyDataset)
        ));
    }

    #[test]
    fn shuffling_the_dataset_changes_nothing() {
        let dataset = tiny_dataset();
        let model = oracle_model(&dataset);
        let spec = PromptSpec::base(IdentifierTerm::News);
        let a = evaluate(
            &model,
            &dataset,
            &spec,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        let mut shuffled = dataset.clone();
        shuffled.rotate_left(4);
        shuffled.swap(0, 7);
        let b = evaluate(
            &model,
            &shuffled,
            &spec,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(a.accuracy, b.accuracy);
        assert_eq!(a.confusion, b.confusion);
    }

    #[test]
    fn confusion_rows_match_class_counts() {
        let dataset = tiny_dataset();
        let model = FixtureModel::constant("neutral");
        let report = evaluate(
            &model,
            &dataset,
            &PromptSpec::base(IdentifierTerm::Input),
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        let stats = crate::corpus::class_distribution(&dataset).unwrap();
        for gold in SentimentLabel::ALL {
            let expected = (stats.fraction(gold) * dataset.len() as f64).round() as usize;
            assert_eq!(report.confusion.row_sum(gold), expected);
        }
    }

    #[test]
    fn compare_prompts_same_model_zero_gain() {
        let dataset = tiny_dataset();
        let model = oracle_model(&dataset);
        let entry = compare_prompts(
            &model,
            &dataset,
            IdentifierTerm::Input,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(entry.gain, 0.0);
        assert_eq!(entry.base, 100.0);
    }

    #[test]
    fn gain_entry_arithmetic() {
        let entry = GainEntry::from_accuracies(64.74, 72.37);
        assert!((entry.gain - 7.63).abs() < 1e-9);
        let entry = GainEntry::from_accuracies(74.95, 80.91);
        assert!((entry.gain - 5.96).abs() < 1e-9);
    }

    /// Accuracy rises with each instruction component the prompt carries.
    fn monotone_model(dataset: &[LabeledSample]) -> FixtureModel {
        let gold: HashMap<String, SentimentLabel> =
            dataset.iter().map(|s| (s.text.clone(), s.gold)).collect();
        FixtureModel::from_fn(move |prompt| {
            let input = prompt
                .lines()
                .rev()
                .find_map(|l| l.strip_prefix("Input: "))
                .unwrap();
            let i: usize = input.rsplit(' ').next().unwrap().parse().unwrap();
            let components = ["Definition:", "Grounding:", "Example:"]
                .iter()
                .filter(|marker| prompt.contains(**marker))
                .count();
            let g = gold[input];
            let reply = if i % 5 < 2 + components {
                g
            } else {
                match g {
                    SentimentLabel::Positive => SentimentLabel::Negative,
                    _ => SentimentLabel::Positive,
                }
            };
            Ok(reply.as_str().to_string())
        })
    }

    #[test]
    fn ablation_curve_strictly_increasing_for_monotone_model() {
        let dataset: Vec<LabeledSample> = (0..20)
            .map(|i| sample(i, SentimentLabel::ALL[i % 3]))
            .collect();
        let model = monotone_model(&dataset);
        let curve = ablation_curve(
            &model,
            &dataset,
            IdentifierTerm::Input,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(curve.len(), 4);
        assert!(curve[0] < curve[1] && curve[1] < curve[2] && curve[2] < curve[3]);
        assert_eq!(curve[3], 1.0);
    }

    #[test]
    fn ablation_curve_flat_for_constant_model() {
        let dataset = tiny_dataset();
        let model = FixtureModel::constant("neutral");
        let curve = ablation_curve(
            &model,
            &dataset,
            IdentifierTerm::Input,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert!(curve.iter().all(|v| *v == curve[0]));
    }

    #[test]
    fn few_shot_row_shape_and_oracle() {
        let dataset = tiny_dataset();
        let model = oracle_model(&dataset);
        let row = few_shot_table(
            &model,
            &dataset,
            IdentifierTerm::News,
            InstructionSpec::bundled(),
            DatasetTag::AllAgree,
        )
        .unwrap();
        assert_eq!(row.len(), 5);
        assert!(row.iter().all(|v| *v == 1.0));
    }

    #[test]
    fn mean_gain_summary() {
        let single = [GainEntry::from_accuracies(50.0, 53.5)];
        let summary = mean_gain(&single).unwrap();
        assert!((summary.mean - 3.5).abs() < 1e-12);
        assert!((summary.max - 3.5).abs() < 1e-12);

        let opposite = [
            GainEntry::from_accuracies(50.0, 51.0),
            GainEntry::from_accuracies(50.0, 49.0),
        ];
        let summary = mean_gain(&opposite).unwrap();
        assert_eq!(summary.mean, 0.0);
        assert_eq!(summary.max, 1.0);

        assert!(matches!(mean_gain(&[]), Err(EvalError::EmptyGains)));
    }

    #[test]
    fn checkpoint_resume_reproduces_clean_run() {
        let dataset = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.jsonl");

        // First run fails at sample 5 (after recording earlier outcomes).
        let gold: HashMap<String, SentimentLabel> =
            dataset.iter().map(|s| (s.text.clone(), s.gold)).collect();
        let failing = {
            let gold = gold.clone();
            FixtureModel::from_fn(move |prompt| {
                let input = prompt
                    .lines()
                    .find_map(|l| l.strip_prefix("Input: "))
                    .unwrap();
                let i: usize = input.rsplit(' ').next().unwrap().parse().unwrap();
                if i >= 5 {
                    Err(ModelError::Transport {
                        message: "connection reset".into(),
                    })
                } else {
                    Ok(gold[input].as_str().to_string())
                }
            })
        };
        let mut evaluator = Evaluator::with_checkpoint(&path);
        evaluator.concurrency = Some(1);
        let spec = PromptSpec::base(IdentifierTerm::Input);
        let err = evaluator
            .evaluate(
                &failing,
                &dataset,
                &spec,
                InstructionSpec::bundled(),
                DatasetTag::Full,
            )
            .unwrap_err();
        match err {
            EvalError::Aborted {
                completed, total, ..
            } => {
                assert_eq!(completed, 5);
                assert_eq!(total, 10);
            }
            other => panic!("expected abort, got {other}"),
        }

        // Resume with a healthy model; only the remaining samples run.
        let healthy_calls = std::sync::Arc::new(AtomicUsize::new(0));
        let healthy = {
            let gold = gold.clone();
            let calls = std::sync::Arc::clone(&healthy_calls);
            FixtureModel::from_fn(move |prompt| {
                calls.fetch_add(1, Ordering::SeqCst);
                let input = prompt
                    .lines()
                    .find_map(|l| l.strip_prefix("Input: "))
                    .unwrap();
                Ok(gold[input].as_str().to_string())
            })
        };
        let resumed = evaluator
            .evaluate(
                &healthy,
                &dataset,
                &spec,
                InstructionSpec::bundled(),
                DatasetTag::Full,
            )
            .unwrap();
        assert_eq!(healthy_calls.load(Ordering::SeqCst), 5);

        // A clean run with no checkpoint matches exactly.
        let clean_model = oracle_model(&dataset);
        let clean = evaluate(
            &clean_model,
            &dataset,
            &spec,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(resumed, clean);
    }

    #[test]
    fn concurrent_evaluation_matches_sequential() {
        let dataset: Vec<LabeledSample> = (0..50)
            .map(|i| sample(i, SentimentLabel::ALL[i % 3]))
            .collect();
        let model = oracle_model(&dataset);
        let spec = PromptSpec::base(IdentifierTerm::Input);
        let sequential = Evaluator {
            concurrency: Some(1),
            checkpoint: None,
        }
        .evaluate(
            &model,
            &dataset,
            &spec,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        let parallel = Evaluator {
            concurrency: Some(8),
            checkpoint: None,
        }
        .evaluate(
            &model,
            &dataset,
            &spec,
            InstructionSpec::bundled(),
            DatasetTag::Full,
        )
        .unwrap();
        assert_eq!(sequential, parallel);
    }

    #[test]
    fn report_tables_render_reference_rows() {
        let rows = vec![GainRow {
            model: "generic".into(),
            dataset: "all_agree".into(),
            identifier: IdentifierTerm::News,
            entry: GainEntry::from_accuracies(64.74, 72.37),
        }];
        let md = gain_table_markdown(&rows);
        assert!(md.contains("| generic | all_agree | news | 64.74 | 72.37 | +7.63 |"));
        let csv = gain_table_csv(&rows);
        assert!(csv.contains("generic,all_agree,news,64.74,72.37,7.63"));

        let fs = vec![FewShotRow {
            dataset: "all_agree".into(),
            identifier: IdentifierTerm::News,
            values: [0.6474, 0.6594, 0.5858, 0.6282, 0.7237],
        }];
        let md = few_shot_table_markdown(&fs);
        assert!(md.contains("| all_agree | news | 64.74 | 65.94 | 58.58 | 62.82 | 72.37 |"));
    }
}
