//! Bundled WSBS-style fixture dataset.
//!
//! A deterministic stand-in for the WallStreetBets Sentiment (WSBS)
//! dataset: 3,000 annotation records of which 80 are irrelevant, resolving
//! to 2,920 labeled samples with 1,509 unanimous annotations and the same
//! class mix as the published release. The texts are synthetic; only the
//! counts and agreement structure are meaningful. Useful for offline
//! benchmarking, demos, and the acceptance suite.

use std::io::Write;
use std::path::Path;

use super::{
    resolve_labels, write_labeled_csv, AnnotationRecord, CorpusError, LabeledSample, SentimentLabel,
};

// Unanimous / resolved per-label counts. Unanimous: 652+498+359 = 1509.
// Resolved: 481+359+571 = 1411. Plus 80 irrelevant records = 3000 total.
const UNANIMOUS: [(SentimentLabel, usize); 3] = [
    (SentimentLabel::Positive, 652),
    (SentimentLabel::Negative, 498),
    (SentimentLabel::Neutral, 359),
];
const RESOLVED: [(SentimentLabel, usize); 3] = [
    (SentimentLabel::Positive, 481),
    (SentimentLabel::Negative, 359),
    (SentimentLabel::Neutral, 571),
];
const IRRELEVANT: usize = 80;

const TICKERS: [&str; 5] = ["GME", "AMC", "TSLA", "SPY", "AAPL"];

const POSITIVE_TEXTS: [&str; 5] = [
    "{T} calls printing again, loaded up on more this morning",
    "diamond hands paying off, {T} is ripping after hours",
    "earnings crushed it and {T} raised guidance, easy hold",
    "{T} breaking out on volume, this train has no brakes",
    "bought the dip on {T} yesterday, already deep green",
];

const NEGATIVE_TEXTS: [&str; 5] = [
    "{T} puts it is, guidance cut for the second quarter running",
    "bagholding {T} all the way down, brutal tape",
    "{T} bleeding out after the dilution announcement",
    "got margin called on {T}, do not catch this knife",
    "{T} short interest climbing while revenue shrinks",
];

const NEUTRAL_TEXTS: [&str; 5] = [
    "{T} earnings call is scheduled for Thursday after close",
    "anyone have the current float numbers for {T} handy",
    "{T} closed flat on light volume today",
    "the 10-K for {T} was filed this afternoon",
    "what time does {T} report tomorrow, premarket or after",
];

const IRRELEVANT_TEXTS: [&str; 4] = [
    "what should I eat for lunch today",
    "mods please fix the flair bot",
    "anyone watching the game tonight",
    "new keyboard day, feels great",
];

/// The 3,000 raw annotation records behind the bundled fixture.
pub fn wsbs_annotation_records() -> Vec<AnnotationRecord> {
    let mut specs: Vec<Spec> = Vec::with_capacity(3000);
    for (label, count) in UNANIMOUS {
        for _ in 0..count {
            specs.push(Spec::Unanimous(label));
        }
    }
    for (label, count) in RESOLVED {
        for _ in 0..count {
            specs.push(Spec::Resolved(label));
        }
    }
    for _ in 0..IRRELEVANT {
        specs.push(Spec::Irrelevant);
    }
    debug_assert_eq!(specs.len(), 3000);

    // Spread the grouped specs across the id space with a stride
    // permutation (gcd(1871, 3000) = 1) so classes interleave.
    let mut slots: Vec<Option<Spec>> = vec![None; specs.len()];
    for (i, spec) in specs.into_iter().enumerate() {
        slots[(i * 1871 + 97) % 3000] = Some(spec);
    }

    slots
        .into_iter()
        .enumerate()
        .map(|(i, spec)| make_record(i, spec.expect("stride permutation covers all slots")))
        .collect()
}

/// The bundled 2,920-sample labeled fixture (1,509 unanimous).
pub fn wsbs_fixture() -> Vec<LabeledSample> {
    let outcome = resolve_labels(wsbs_annotation_records());
    debug_assert!(outcome.rejects.is_empty());
    outcome.samples
}

/// Writes the fixture to `path` in the `id,text,label,ann...` CSV format.
pub fn write_wsbs_csv(path: &Path) -> Result<(), CorpusError> {
    let samples = wsbs_fixture();
    let mut file = std::fs::File::create(path)?;
    write_labeled_csv(&samples, &mut file)?;
    file.flush()?;
    Ok(())
}

#[derive(Clone, Copy)]
enum Spec {
    Unanimous(SentimentLabel),
    Resolved(SentimentLabel),
    Irrelevant,
}

fn make_record(i: usize, spec: Spec) -> AnnotationRecord {
    let id = format!("wsbs-{i:04}");
    match spec {
        Spec::Unanimous(label) => AnnotationRecord {
            id,
            text: text_for(label, i),
            relevant: true,
            round1: vec![label, label],
            resolution: vec![],
        },
        Spec::Resolved(label) => AnnotationRecord {
            id,
            text: text_for(label, i),
            relevant: true,
            round1: vec![label, dissent_for(label, i)],
            resolution: vec![label, label],
        },
        Spec::Irrelevant => AnnotationRecord {
            id,
            text: IRRELEVANT_TEXTS[i % IRRELEVANT_TEXTS.len()].to_string(),
            relevant: false,
            round1: vec![SentimentLabel::Neutral, SentimentLabel::Neutral],
            resolution: vec![],
        },
    }
}

fn text_for(label: SentimentLabel, i: usize) -> String {
    let pool = match label {
        SentimentLabel::Positive => &POSITIVE_TEXTS,
        SentimentLabel::Negative => &NEGATIVE_TEXTS,
        SentimentLabel::Neutral => &NEUTRAL_TEXTS,
    };
    let template = pool[i % pool.len()];
    let ticker = TICKERS[(i / pool.len()) % TICKERS.len()];
    template.replace("{T}", ticker)
}

fn dissent_for(label: SentimentLabel, i: usize) -> SentimentLabel {
    let others: [SentimentLabel; 2] = match label {
        SentimentLabel::Positive => [SentimentLabel::Negative, SentimentLabel::Neutral],
        SentimentLabel::Negative => [SentimentLabel::Positive, SentimentLabel::Neutral],
        SentimentLabel::Neutral => [SentimentLabel::Positive, SentimentLabel::Negative],
    };
    others[i % 2]
}
