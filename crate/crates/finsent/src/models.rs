//! Sentiment model interface.
//!
//! Two model capabilities are distinguished. Generative models take a
//! rendered prompt and return free text that is parsed into a label;
//! probabilistic (classifier) models expose per-class logits or
//! probabilities for a text. The remote chat-completion client implements
//! the generative side over HTTPS with retries and a content-addressed
//! on-disk response cache; fixture models implement both sides
//! deterministically for offline benchmarking and tests.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::SentimentLabel;
use crate::prompting::PromptText;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("transport failure: {message}")]
    Transport { message: String },
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unparseable model output: {raw:?}")]
    Unparseable { raw: String },
    #[error("model contract violation: {message}")]
    Contract { message: String },
    #[error("invalid class scores: {reason}")]
    InvalidScores { reason: String },
    #[error("cache i/o error: {0}")]
    Cache(#[from] std::io::Error),
    #[error("invalid endpoint: {reason}")]
    InvalidEndpoint { reason: String },
}

/// A normalized probability distribution over the three sentiment classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbTriple {
    p_pos: f64,
    p_neg: f64,
    p_neu: f64,
}

impl ProbTriple {
    /// Validates non-negative entries summing to 1 within 1e-9.
    pub fn new(p_pos: f64, p_neg: f64, p_neu: f64) -> Result<ProbTriple, ModelError> {
        for p in [p_pos, p_neg, p_neu] {
            if !p.is_finite() || p < 0.0 {
                return Err(ModelError::InvalidScores {
                    reason: format!("probability {p} out of range"),
                });
            }
        }
        let sum = p_pos + p_neg + p_neu;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidScores {
                reason: format!("probabilities sum to {sum}, expected 1"),
            });
        }
        Ok(ProbTriple {
            p_pos,
            p_neg,
            p_neu,
        })
    }

    pub fn p_pos(&self) -> f64 {
        self.p_pos
    }

    pub fn p_neg(&self) -> f64 {
        self.p_neg
    }

    pub fn p_neu(&self) -> f64 {
        self.p_neu
    }

    pub fn get(&self, label: SentimentLabel) -> f64 {
        match label {
            SentimentLabel::Positive => self.p_pos,
            SentimentLabel::Negative => self.p_neg,
            SentimentLabel::Neutral => self.p_neu,
        }
    }

    /// Highest-probability class, with the fixed tie order
    /// positive > negative > neutral.
    pub fn argmax(&self) -> SentimentLabel {
        if self.p_pos >= self.p_neg && self.p_pos >= self.p_neu {
            SentimentLabel::Positive
        } else if self.p_neg >= self.p_neu {
            SentimentLabel::Negative
        } else {
            SentimentLabel::Neutral
        }
    }
}

/// Numerically stabilized softmax over a logit triple.
pub fn softmax(logits: [f64; 3]) -> Result<ProbTriple, ModelError> {
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(ModelError::InvalidScores {
            reason: format!("non-finite logits {logits:?}"),
        });
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = [
        (logits[0] - max).exp(),
        (logits[1] - max).exp(),
        (logits[2] - max).exp(),
    ];
    let sum: f64 = exps.iter().sum();
    ProbTriple::new(exps[0] / sum, exps[1] / sum, exps[2] / sum)
}

/// One classified document.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub doc_id: String,
    pub label: SentimentLabel,
    pub probs: Option<ProbTriple>,
    /// The raw model reply, retained for audit when available.
    pub raw: Option<String>,
}

/// Extracts a sentiment label from free-form model output.
///
/// Scans case-insensitively for the first occurrence of a canonical label
/// word; the synonyms bullish/bearish/stable apply only when no canonical
/// label occurs anywhere in the text.
pub fn parse_label(raw: &str) -> Result<SentimentLabel, ModelError> {
    const CANONICAL: [(&str, SentimentLabel); 3] = [
        ("positive", SentimentLabel::Positive),
        ("negative", SentimentLabel::Negative),
        ("neutral", SentimentLabel::Neutral),
    ];
    const SYNONYMS: [(&str, SentimentLabel); 3] = [
        ("bullish", SentimentLabel::Positive),
        ("bearish", SentimentLabel::Negative),
        ("stable", SentimentLabel::Neutral),
    ];
    let lower = raw.to_ascii_lowercase();
    for table in [&CANONICAL, &SYNONYMS] {
        let first = table
            .iter()
            .filter_map(|(word, label)| lower.find(word).map(|at| (at, *label)))
            .min_by_key(|(at, _)| *at);
        if let Some((_, label)) = first {
            return Ok(label);
        }
    }
    Err(ModelError::Unparseable {
        raw: raw.to_string(),
    })
}

/// A model reached through text completion.
pub trait GenerativeModel: Send + Sync {
    /// Returns the raw completion for a prompt.
    fn complete(&self, prompt: &PromptText) -> Result<String, ModelError>;

    /// How many requests may usefully be in flight at once.
    fn concurrency_hint(&self) -> usize {
        1
    }
}

/// Per-class scores returned by a classifier model, in label order
/// positive, negative, neutral.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassScores {
    /// Unnormalized logits.
    Logits(Vec<f64>),
    /// Probabilities (renormalized on use).
    Probs(Vec<f64>),
}

/// A classifier exposing per-class scores.
pub trait ProbabilisticModel: Send + Sync {
    fn scores(&self, text: &str) -> Result<ClassScores, ModelError>;
}

/// Completion plus label parsing; the raw reply is kept on the prediction.
pub fn classify_generative(
    model: &dyn GenerativeModel,
    prompt: &PromptText,
    doc_id: &str,
) -> Result<Prediction, ModelError> {
    let raw = model.complete(prompt)?;
    let label = parse_label(&raw)?;
    Ok(Prediction {
        doc_id: doc_id.to_string(),
        label,
        probs: None,
        raw: Some(raw),
    })
}

/// Scores plus normalization; the label is the argmax of the normalized
/// distribution.
pub fn classify_probabilistic(
    model: &dyn ProbabilisticModel,
    text: &str,
    doc_id: &str,
) -> Result<Prediction, ModelError> {
    let scores = model.scores(text)?;
    let probs = normalize_scores(scores)?;
    Ok(Prediction {
        doc_id: doc_id.to_string(),
        label: probs.argmax(),
        probs: Some(probs),
        raw: None,
    })
}

fn normalize_scores(scores: ClassScores) -> Result<ProbTriple, ModelError> {
    match scores {
        ClassScores::Logits(v) => softmax(arity3(&v)?),
        ClassScores::Probs(v) => {
            let arr = arity3(&v)?;
            if arr.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(ModelError::InvalidScores {
                    reason: format!("invalid probabilities {arr:?}"),
                });
            }
            let sum: f64 = arr.iter().sum();
            if sum <= 0.0 {
                return Err(ModelError::InvalidScores {
                    reason: "probabilities sum to zero".into(),
                });
            }
            ProbTriple::new(arr[0] / sum, arr[1] / sum, arr[2] / sum)
        }
    }
}

fn arity3(v: &[f64]) -> Result<[f64; 3], ModelError> {
    match v {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(ModelError::Contract {
            message: format!("expected 3 class scores, got {}", v.len()),
        }),
    }
}

/// Connection settings for a remote chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct ModelEndpoint {
    /// Full URL the completion request is posted to.
    pub base_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: Option<String>,
    pub timeout: Duration,
    pub max_retries: u32,
    pub retry_base_delay: Duration,
    pub cache_dir: Option<PathBuf>,
    /// Bounded in-flight requests the caller should respect.
    pub concurrency: usize,
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> ModelEndpoint {
        ModelEndpoint {
            base_url: base_url.into(),
            model_name: model_name.into(),
            auth_env: None,
            timeout: Duration::from_secs(30),
            max_retries: 3,
            retry_base_delay: Duration::from_millis(200),
            cache_dir: None,
            concurrency: 4,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.base_url.is_empty() {
            return Err(ModelError::InvalidEndpoint {
                reason: "empty base_url".into(),
            });
        }
        if self.timeout.is_zero() {
            return Err(ModelError::InvalidEndpoint {
                reason: "timeout must be positive".into(),
            });
        }
        if self.concurrency == 0 {
            return Err(ModelError::InvalidEndpoint {
                reason: "concurrency must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Content address for a completion: endpoint identity, model name, and
/// the exact prompt bytes.
pub fn cache_key(base_url: &str, model_name: &str, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(base_url.as_bytes());
    hasher.update([0]);
    hasher.update(model_name.as_bytes());
    hasher.update([0]);
    hasher.update(prompt.as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("writing to string cannot fail");
    }
    hex
}

#[derive(Serialize)]
struct CacheMeta<'a> {
    base_url: &'a str,
    model: &'a str,
    created_unix: u64,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Chat-completion client with retries, deterministic decoding
/// (temperature 0), and an optional on-disk response cache.
///
/// Cached completions are returned without touching the network, so warm
/// benchmark reruns are free and work offline.
pub struct RemoteChatModel {
    endpoint: ModelEndpoint,
    client: reqwest::blocking::Client,
}

impl RemoteChatModel {
    pub fn new(endpoint: ModelEndpoint) -> Result<RemoteChatModel, ModelError> {
        endpoint.validate()?;
        if let Some(dir) = &endpoint.cache_dir {
            std::fs::create_dir_all(dir)?;
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(endpoint.timeout)
            .build()
            .map_err(|e| ModelError::Transport {
                message: e.to_string(),
            })?;
        Ok(RemoteChatModel { endpoint, client })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn cache_paths(&self, key: &str) -> Option<(PathBuf, PathBuf)> {
        self.endpoint.cache_dir.as_ref().map(|dir| {
            (
                dir.join(format!("{key}.txt")),
                dir.join(format!("{key}.meta.json")),
            )
        })
    }

    fn read_cache(&self, key: &str) -> Option<String> {
        let (content_path, _) = self.cache_paths(key)?;
        std::fs::read_to_string(content_path).ok()
    }

    fn write_cache(&self, key: &str, content: &str) -> Result<(), ModelError> {
        let Some((content_path, meta_path)) = self.cache_paths(key) else {
            return Ok(());
        };
        let meta = CacheMeta {
            base_url: &self.endpoint.base_url,
            model: &self.endpoint.model_name,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        atomic_write(&content_path, content.as_bytes())?;
        atomic_write(
            &meta_path,
            serde_json::to_string(&meta)
                .map_err(std::io::Error::other)?
                .as_bytes(),
        )?;
        Ok(())
    }

    fn post_once(&self, prompt: &str) -> Result<String, AttemptError> {
        let request = ChatRequest {
            model: &self.endpoint.model_name,
            messages: [ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature: 0.0,
        };
        let mut builder = self.client.post(&self.endpoint.base_url).json(&request);
        if let Some(var) = &self.endpoint.auth_env {
            match std::env::var(var) {
                Ok(token) => builder = builder.bearer_auth(token),
                Err(_) => {
                    return Err(AttemptError::Fatal(ModelError::InvalidEndpoint {
                        reason: format!("auth environment variable {var} is not set"),
                    }))
                }
            }
        }
        let response = builder
            .send()
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| AttemptError::Transient(e.to_string()))?;
        if status.is_success() {
            let parsed: ChatResponse = serde_json::from_str(&body).map_err(|e| {
                AttemptError::Fatal(ModelError::Contract {
                    message: format!("bad completion payload: {e}"),
                })
            })?;
            parsed
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .ok_or_else(|| {
                    AttemptError::Fatal(ModelError::Contract {
                        message: "completion payload has no choices".into(),
                    })
                })
        } else if is_transient_status(status.as_u16()) {
            Err(AttemptError::Transient(format!(
                "status {}: {}",
                status.as_u16(),
                excerpt(&body)
            )))
        } else {
            Err(AttemptError::Fatal(ModelError::Status {
                status: status.as_u16(),
                body: excerpt(&body),
            }))
        }
    }
}

enum AttemptError {
    Transient(String),
    Fatal(ModelError),
}

fn is_transient_status(status: u16) -> bool {
    status == 408 || status == 429 || (500..600).contains(&status)
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 200;
    if body.len() <= LIMIT {
        body.to_string()
    } else {
        let mut cut = LIMIT;
        while !body.is_char_boundary(cut) {
            cut -= 1;
        }
        format!("{}...", &body[..cut])
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), std::io::Error> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

impl GenerativeModel for RemoteChatModel {
    fn complete(&self, prompt: &PromptText) -> Result<String, ModelError> {
        let key = cache_key(
            &self.endpoint.base_url,
            &self.endpoint.model_name,
            prompt.text(),
        );
        if let Some(cached) = self.read_cache(&key) {
            return Ok(cached);
        }
        let mut last_transient = String::new();
        for attempt in 0..=self.endpoint.max_retries {
            if attempt > 0 {
                let backoff = self.endpoint.retry_base_delay * 2u32.pow(attempt - 1);
                std::thread::sleep(backoff.min(Duration::from_secs(5)));
            }
            match self.post_once(prompt.text()) {
                Ok(content) => {
                    self.write_cache(&key, &content)?;
                    return Ok(content);
                }
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Transient(message)) => last_transient = message,
            }
        }
        Err(ModelError::Transport {
            message: format!(
                "{} attempts exhausted, last failure: {last_transient}",
                self.endpoint.max_retries + 1
            ),
        })
    }

    fn concurrency_hint(&self) -> usize {
        self.endpoint.concurrency
    }
}

type ReplyFn = dyn Fn(&str) -> Result<String, ModelError> + Send + Sync;

/// Deterministic generative model for tests and offline runs: scripted
/// replies keyed by exact prompt text, with an optional fallback function
/// of the prompt bytes.
#[derive(Clone, Default)]
pub struct FixtureModel {
    replies: HashMap<String, String>,
    fallback: Option<Arc<ReplyFn>>,
}

impl FixtureModel {
    pub fn new() -> FixtureModel {
        FixtureModel::default()
    }

    /// Always replies with the same text.
    pub fn constant(reply: impl Into<String>) -> FixtureModel {
        let reply = reply.into();
        FixtureModel::from_fn(move |_| Ok(reply.clone()))
    }

    /// Replies as a pure function of the prompt bytes.
    pub fn from_fn<F>(f: F) -> FixtureModel
    where
        F: Fn(&str) -> Result<String, ModelError> + Send + Sync + 'static,
    {
        FixtureModel {
            replies: HashMap::new(),
            fallback: Some(Arc::new(f)),
        }
    }

    pub fn with_reply(mut self, prompt_text: impl Into<String>, reply: impl Into<String>) -> Self {
        self.replies.insert(prompt_text.into(), reply.into());
        self
    }
}

impl GenerativeModel for FixtureModel {
    fn complete(&self, prompt: &PromptText) -> Result<String, ModelError> {
        if let Some(reply) = self.replies.get(prompt.text()) {
            return Ok(reply.clone());
        }
        if let Some(fallback) = &self.fallback {
            return fallback(prompt.text());
        }
        Err(ModelError::Contract {
            message: "fixture model has no scripted reply for this prompt".into(),
        })
    }

    fn concurrency_hint(&self) -> usize {
        4
    }
}

type ScoreFn = dyn Fn(&str) -> Result<ClassScores, ModelError> + Send + Sync;

/// Deterministic classifier model: per-class scores as a pure function of
/// the input text.
#[derive(Clone)]
pub struct FixtureProbabilisticModel {
    scores: Arc<ScoreFn>,
}

impl FixtureProbabilisticModel {
    pub fn from_fn<F>(f: F) -> FixtureProbabilisticModel
    where
        F: Fn(&str) -> Result<ClassScores, ModelError> + Send + Sync + 'static,
    {
        FixtureProbabilisticModel {
            scores: Arc::new(f),
        }
    }
}

impl ProbabilisticModel for FixtureProbabilisticModel {
    fn scores(&self, text: &str) -> Result<ClassScores, ModelError> {
        (self.scores)(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::{build_base_prompt, IdentifierTerm};

    #[test]
    fn softmax_symmetry_and_shift_invariance() {
        let p = softmax([0.0, 0.0, 0.0]).unwrap();
        assert!((p.p_pos() - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.p_neg() - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.p_neu() - 1.0 / 3.0).abs() < 1e-12);

        let a = softmax([0.3, -1.2, 2.5]).unwrap();
        let b = softmax([0.3 + 7.0, -1.2 + 7.0, 2.5 + 7.0]).unwrap();
        assert!((a.p_pos() - b.p_pos()).abs() < 1e-12);
        assert!((a.p_neg() - b.p_neg()).abs() < 1e-12);
        assert!((a.p_neu() - b.p_neu()).abs() < 1e-12);
    }

    #[test]
    fn softmax_hand_values() {
        let p = softmax([2.0, 1.0, 0.0]).unwrap();
        assert!((p.p_pos() - 0.6652).abs() < 1e-4);
        assert!((p.p_neg() - 0.2447).abs() < 1e-4);
        assert!((p.p_neu() - 0.0900).abs() < 1e-4);

        let q = softmax([3.0, 1.0, 1.0]).unwrap();
        assert!((q.p_pos() - 0.7870).abs() < 1e-4);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(softmax([f64::NAN, 0.0, 0.0]).is_err());
        assert!(softmax([f64::INFINITY, 0.0, 0.0]).is_err());
    }

    #[test]
    fn prob_triple_invariants() {
        assert!(ProbTriple::new(0.5, 0.5, 0.1).is_err());
        assert!(ProbTriple::new(-0.1, 0.6, 0.5).is_err());
        assert!(ProbTriple::new(0.2, 0.3, 0.5).is_ok());
    }

    #[test]
    fn argmax_tie_order() {
        let tie_pos_neg = ProbTriple::new(0.4, 0.4, 0.2).unwrap();
        assert_eq!(tie_pos_neg.argmax(), SentimentLabel::Positive);
        let tie_neg_neu = ProbTriple::new(0.2, 0.4, 0.4).unwrap();
        assert_eq!(tie_neg_neu.argmax(), SentimentLabel::Negative);
        let neu = ProbTriple::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(neu.argmax(), SentimentLabel::Neutral);
    }

    #[test]
    fn parse_label_first_occurrence_wins() {
        assert_eq!(
            parse_label("Answer: Neutral.").unwrap(),
            SentimentLabel::Neutral
        );
        assert_eq!(
            parse_label("negative, because guidance was cut (not positive)").unwrap(),
            SentimentLabel::Negative
        );
    }

    #[test]
    fn parse_label_synonym_fallback() {
        assert_eq!(parse_label("bullish!").unwrap(), SentimentLabel::Positive);
        assert_eq!(
            parse_label("looks bearish").unwrap(),
            SentimentLabel::Negative
        );
        assert_eq!(
            parse_label("pretty stable imo").unwrap(),
            SentimentLabel::Neutral
        );
        // Canonical labels win even when a synonym occurs earlier.
        assert_eq!(
            parse_label("bullish? no, negative").unwrap(),
            SentimentLabel::Negative
        );
    }

    #[test]
    fn parse_label_unparseable() {
        assert!(matches!(
            parse_label("¯\\_(ツ)_/¯"),
            Err(ModelError::Unparseable { .. })
        ));
    }

    #[test]
    fn classify_generative_with_fixture() {
        let prompt = build_base_prompt("GME up", IdentifierTerm::Input).unwrap();
        let model = FixtureModel::new().with_reply(prompt.text(), "positive");
        let prediction = classify_generative(&model, &prompt, "d1").unwrap();
        assert_eq!(prediction.label, SentimentLabel::Positive);
        assert_eq!(prediction.raw.as_deref(), Some("positive"));
        assert!(prediction.probs.is_none());

        // Determinism: same prompt, same prediction.
        let again = classify_generative(&model, &prompt, "d1").unwrap();
        assert_eq!(prediction, again);
    }

    #[test]
    fn classify_generative_unparseable_reply() {
        let prompt = build_base_prompt("hmm", IdentifierTerm::Input).unwrap();
        let model = FixtureModel::constant("¯\\_(ツ)_/¯");
        assert!(matches!(
            classify_generative(&model, &prompt, "d1"),
            Err(ModelError::Unparseable { .. })
        ));
    }

    #[test]
    fn classify_probabilistic_from_logits() {
        let model =
            FixtureProbabilisticModel::from_fn(|_| Ok(ClassScores::Logits(vec![3.0, 1.0, 1.0])));
        let prediction = classify_probabilistic(&model, "text", "d1").unwrap();
        assert_eq!(prediction.label, SentimentLabel::Positive);
        let probs = prediction.probs.unwrap();
        assert!((probs.p_pos() - 0.7870).abs() < 1e-4);
    }

    #[test]
    fn classify_probabilistic_tie_and_unit_prob() {
        let model =
            FixtureProbabilisticModel::from_fn(|_| Ok(ClassScores::Probs(vec![0.4, 0.4, 0.2])));
        assert_eq!(
            classify_probabilistic(&model, "t", "d").unwrap().label,
            SentimentLabel::Positive
        );
        let model =
            FixtureProbabilisticModel::from_fn(|_| Ok(ClassScores::Probs(vec![0.0, 0.0, 1.0])));
        assert_eq!(
            classify_probabilistic(&model, "t", "d").unwrap().label,
            SentimentLabel::Neutral
        );
    }

    #[test]
    fn classify_probabilistic_wrong_arity_is_contract_error() {
        let model = FixtureProbabilisticModel::from_fn(|_| Ok(ClassScores::Probs(vec![0.5, 0.5])));
        assert!(matches!(
            classify_probabilistic(&model, "t", "d"),
            Err(ModelError::Contract { .. })
        ));
    }

    #[test]
    fn cache_key_is_stable_and_distinct() {
        let a = cache_key("http://x", "m", "p");
        let b = cache_key("http://x", "m", "p");
        let c = cache_key("http://x", "m2", "p");
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }
}
