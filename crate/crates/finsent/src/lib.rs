//! Financial sentiment toolkit: prompt benchmarking for sentiment models,
//! daily per-ticker sentiment indices, and next-day stock-price regression
//! backtests.
//!
//! The crate is organized along the pipeline:
//!
//! - [`corpus`] — document and labeled-dataset ingestion, ticker mention
//!   detection, dataset statistics, and the bundled fixture dataset.
//! - [`prompting`] — byte-exact base, annotator-instruction, and few-shot
//!   prompt rendering.
//! - [`models`] — the sentiment-model interface: a remote chat-completion
//!   client with retries and an on-disk response cache, deterministic
//!   fixture models, label parsing, and probability handling.
//! - [`evaluation`] — accuracy benchmarking, prompt-variant gains, ablation
//!   curves, few-shot comparisons, and report tables.
//! - [`scoring`] — per-ticker daily sentiment indices (quantity-based and
//!   confidence-score-based).
//! - [`prediction`] — OHLCV alignment, temporal splits, ridge regression,
//!   error metrics, and improvement tables.
//! - [`cli`] — the run configuration and the command implementations the
//!   `finsent` binary wires together.

pub mod cli;
pub mod corpus;
pub mod evaluation;
pub mod models;
pub mod prediction;
pub mod prompting;
pub mod scoring;
pub mod tz;

pub use corpus::{Document, LabeledSample, SentimentLabel};
pub use models::{Prediction, ProbTriple};
pub use prompting::{IdentifierTerm, InstructionSpec, PromptSpec, PromptText};
pub use scoring::{DailySentimentIndex, ScoreMethod};
pub use tz::ExchangeTz;
