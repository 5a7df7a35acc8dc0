//! Prompt construction: base, annotator-instruction (with component
//! ablations), and few-shot prompts.
//!
//! Rendering is byte-exact and pure: the same inputs always produce the
//! same bytes, with LF line endings and a trailing space after the final
//! `Answer:` cue. Every prompt records its section layout so callers can
//! inspect or diff the exact byte ranges.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentimentLabel;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt input text must not be empty")]
    EmptyText,
    #[error("annotator prompt needs at least one instruction component")]
    EmptyComponents,
    #[error("few-shot prompt needs 1 to 3 shots, got {got}")]
    InvalidShotCount { got: usize },
    #[error("invalid instruction spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("failed to read instruction spec {path:?}: {source}")]
    SpecIo {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse instruction spec {path:?}: {reason}")]
    SpecParse { path: String, reason: String },
}

/// The noun naming the sample inside the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentifierTerm {
    Input,
    News,
    Tweet,
}

impl IdentifierTerm {
    pub const ALL: [IdentifierTerm; 3] = [
        IdentifierTerm::Input,
        IdentifierTerm::News,
        IdentifierTerm::Tweet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            IdentifierTerm::Input => "input",
            IdentifierTerm::News => "news",
            IdentifierTerm::Tweet => "tweet",
        }
    }
}

impl fmt::Display for IdentifierTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IdentifierTerm {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "input" => Ok(IdentifierTerm::Input),
            "news" => Ok(IdentifierTerm::News),
            "tweet" => Ok(IdentifierTerm::Tweet),
            other => Err(PromptError::InvalidSpec {
                reason: format!("unknown identifier term {other:?}"),
            }),
        }
    }
}

/// Per-label payload (one entry for each sentiment class).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerLabel<T> {
    pub positive: T,
    pub negative: T,
    pub neutral: T,
}

impl<T> PerLabel<T> {
    pub fn get(&self, label: SentimentLabel) -> &T {
        match label {
            SentimentLabel::Positive => &self.positive,
            SentimentLabel::Negative => &self.negative,
            SentimentLabel::Neutral => &self.neutral,
        }
    }
}

/// The annotator instruction: per-label definitions, a grounding sentence
/// mapping the labels onto bullish/bearish/stable, and one example text
/// per label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionSpec {
    pub definition: PerLabel<String>,
    pub grounding: String,
    pub examples: PerLabel<String>,
}

#[derive(Deserialize)]
struct SpecFile {
    definition: PerLabel<String>,
    grounding: String,
    example: PerLabel<SpecExample>,
}

#[derive(Deserialize)]
struct SpecExample {
    text: String,
}

static BUNDLED: OnceLock<InstructionSpec> = OnceLock::new();
const BUNDLED_TOML: &str = include_str!("../assets/instruction_default.toml");

impl InstructionSpec {
    /// The bundled default instruction.
    pub fn bundled() -> &'static InstructionSpec {
        BUNDLED.get_or_init(|| {
            InstructionSpec::from_toml(BUNDLED_TOML, "<bundled>")
                .expect("bundled instruction spec is valid")
        })
    }

    /// Loads a spec from a TOML or JSON file (chosen by extension).
    pub fn load(path: &Path) -> Result<InstructionSpec, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| PromptError::SpecIo {
            path: path.display().to_string(),
            source,
        })?;
        let name = path.display().to_string();
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => InstructionSpec::from_json(&text, &name),
            _ => InstructionSpec::from_toml(&text, &name),
        }
    }

    pub fn from_toml(text: &str, name: &str) -> Result<InstructionSpec, PromptError> {
        let file: SpecFile = toml::from_str(text).map_err(|e| PromptError::SpecParse {
            path: name.to_string(),
            reason: e.to_string(),
        })?;
        InstructionSpec::from_file(file)
    }

    pub fn from_json(text: &str, name: &str) -> Result<InstructionSpec, PromptError> {
        let file: SpecFile = serde_json::from_str(text).map_err(|e| PromptError::SpecParse {
            path: name.to_string(),
            reason: e.to_string(),
        })?;
        InstructionSpec::from_file(file)
    }

    fn from_file(file: SpecFile) -> Result<InstructionSpec, PromptError> {
        let spec = InstructionSpec {
            definition: file.definition,
            grounding: file.grounding,
            examples: PerLabel {
                positive: file.example.positive.text,
                negative: file.example.negative.text,
                neutral: file.example.neutral.text,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        for label in SentimentLabel::ALL {
            if self.definition.get(label).trim().is_empty() {
                return Err(PromptError::InvalidSpec {
                    reason: format!("empty definition for {label}"),
                });
            }
            if self.examples.get(label).trim().is_empty() {
                return Err(PromptError::InvalidSpec {
                    reason: format!("empty example for {label}"),
                });
            }
        }
        if self.grounding.trim().is_empty() {
            return Err(PromptError::InvalidSpec {
                reason: "empty grounding".into(),
            });
        }
        Ok(())
    }

    /// This instruction's examples in the fixed shot order positive,
    /// negative, neutral, truncated to `k`.
    pub fn shots(&self, k: usize) -> Vec<(String, SentimentLabel)> {
        SentimentLabel::ALL
            .into_iter()
            .take(k)
            .map(|label| (self.examples.get(label).clone(), label))
            .collect()
    }
}

/// Which instruction components an annotator prompt includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentSet {
    pub definition: bool,
    pub grounding: bool,
    pub example: bool,
}

impl ComponentSet {
    pub const DEFINITION: ComponentSet = ComponentSet {
        definition: true,
        grounding: false,
        example: false,
    };
    pub const DEFINITION_GROUNDING: ComponentSet = ComponentSet {
        definition: true,
        grounding: true,
        example: false,
    };
    pub const FULL: ComponentSet = ComponentSet {
        definition: true,
        grounding: true,
        example: true,
    };

    /// The cumulative ablation ladder D, D+G, D+G+E.
    pub const ABLATION: [ComponentSet; 3] = [
        ComponentSet::DEFINITION,
        ComponentSet::DEFINITION_GROUNDING,
        ComponentSet::FULL,
    ];

    pub fn is_empty(&self) -> bool {
        !(self.definition || self.grounding || self.example)
    }
}

impl fmt::Display for ComponentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.definition {
            parts.push("D");
        }
        if self.grounding {
            parts.push("G");
        }
        if self.example {
            parts.push("E");
        }
        f.write_str(&parts.join("+"))
    }
}

/// Named byte range inside a rendered prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Instruction,
    Annotator,
    /// 1-based shot number.
    Shot(usize),
    Input,
    AnswerCue,
}

/// A rendered prompt plus its section layout. Concatenating the section
/// ranges reproduces the rendered string exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptText {
    rendered: String,
    sections: Vec<(Section, Range<usize>)>,
}

impl PromptText {
    pub fn text(&self) -> &str {
        &self.rendered
    }

    pub fn sections(&self) -> &[(Section, Range<usize>)] {
        &self.sections
    }

    /// The bytes of the first section with this name, if present.
    pub fn section_str(&self, section: Section) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, range)| &self.rendered[range.clone()])
    }
}

struct SectionWriter {
    rendered: String,
    sections: Vec<(Section, Range<usize>)>,
}

impl SectionWriter {
    fn new() -> Self {
        SectionWriter {
            rendered: String::new(),
            sections: Vec::new(),
        }
    }

    fn push(&mut self, section: Section, text: &str) {
        let start = self.rendered.len();
        self.rendered.push_str(text);
        self.sections.push((section, start..self.rendered.len()));
    }

    fn finish(self) -> PromptText {
        PromptText {
            rendered: self.rendered,
            sections: self.sections,
        }
    }
}

fn instruction_line(identifier: IdentifierTerm) -> String {
    format!(
        "Instruction: What is the sentiment of this {identifier}? Please choose an answer from {{negative/neutral/positive}}\n"
    )
}

/// Renders the plain three-section prompt: instruction line, input line,
/// answer cue.
pub fn build_base_prompt(
    text: &str,
    identifier: IdentifierTerm,
) -> Result<PromptText, PromptError> {
    if text.is_empty() {
        return Err(PromptError::EmptyText);
    }
    let mut w = SectionWriter::new();
    w.push(Section::Instruction, &instruction_line(identifier));
    w.push(Section::Input, &format!("Input: {text}\n"));
    w.push(Section::AnswerCue, "Answer: ");
    Ok(w.finish())
}

/// Renders the annotator block for the requested components, in the fixed
/// order definition, grounding, example. Cumulative component sets render
/// to strings that extend each other by suffixing, so D is a prefix of
/// D+G, which is a prefix of D+G+E.
fn render_annotator_block(spec: &InstructionSpec, components: ComponentSet) -> String {
    let mut block = String::new();
    if components.definition {
        block.push_str("Definition:\n");
        for label in SentimentLabel::ALL {
            block.push_str(&format!("{label}: {}\n", spec.definition.get(label)));
        }
    }
    if components.grounding {
        block.push_str(&format!("Grounding:\n{}\n", spec.grounding));
    }
    if components.example {
        block.push_str("Example:\n");
        for label in SentimentLabel::ALL {
            block.push_str(&format!("{label}: {}\n", spec.examples.get(label)));
        }
    }
    block
}

/// Base prompt with the annotator instruction block inserted between the
/// instruction line and the input line.
pub fn build_aiap_prompt(
    text: &str,
    identifier: IdentifierTerm,
    spec: &InstructionSpec,
    components: ComponentSet,
) -> Result<PromptText, PromptError> {
    if text.is_empty() {
        return Err(PromptError::EmptyText);
    }
    if components.is_empty() {
        return Err(PromptError::EmptyComponents);
    }
    spec.validate()?;
    let mut w = SectionWriter::new();
    w.push(Section::Instruction, &instruction_line(identifier));
    w.push(
        Section::Annotator,
        &render_annotator_block(spec, components),
    );
    w.push(Section::Input, &format!("Input: {text}\n"));
    w.push(Section::AnswerCue, "Answer: ");
    Ok(w.finish())
}

/// Few-shot prompt: the instruction line once, then each shot as a
/// completed `Input:`/`Answer:` pair, then the open answer cue.
pub fn build_few_shot_prompt(
    text: &str,
    identifier: IdentifierTerm,
    shots: &[(String, SentimentLabel)],
) -> Result<PromptText, PromptError> {
    if text.is_empty() {
        return Err(PromptError::EmptyText);
    }
    if shots.is_empty() || shots.len() > 3 {
        return Err(PromptError::InvalidShotCount { got: shots.len() });
    }
    let mut w = SectionWriter::new();
    w.push(Section::Instruction, &instruction_line(identifier));
    for (i, (shot_text, label)) in shots.iter().enumerate() {
        w.push(
            Section::Shot(i + 1),
            &format!("Input: {shot_text}\nAnswer: {label}\n"),
        );
    }
    w.push(Section::Input, &format!("Input: {text}\n"));
    w.push(Section::AnswerCue, "Answer: ");
    Ok(w.finish())
}

/// A prompt family for reporting purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptFamily {
    Base,
    Aiap(ComponentSet),
    FewShot(usize),
}

impl fmt::Display for PromptFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptFamily::Base => write!(f, "base"),
            PromptFamily::Aiap(c) if *c == ComponentSet::FULL => write!(f, "aiap"),
            PromptFamily::Aiap(c) => write!(f, "aiap[{c}]"),
            PromptFamily::FewShot(k) => write!(f, "{k}-shot"),
        }
    }
}

/// Fully specified prompt configuration: identifier term plus either an
/// annotator component set, a shot list, or neither (base prompt).
///
/// Few-shot and annotator prompts are distinct families; a spec never
/// carries both shots and components.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    identifier: IdentifierTerm,
    components: ComponentSet,
    shots: Vec<(String, SentimentLabel)>,
}

impl PromptSpec {
    pub fn base(identifier: IdentifierTerm) -> PromptSpec {
        PromptSpec {
            identifier,
            components: ComponentSet {
                definition: false,
                grounding: false,
                example: false,
            },
            shots: Vec::new(),
        }
    }

    pub fn aiap(
        identifier: IdentifierTerm,
        components: ComponentSet,
    ) -> Result<PromptSpec, PromptError> {
        if components.is_empty() {
            return Err(PromptError::EmptyComponents);
        }
        Ok(PromptSpec {
            identifier,
            components,
            shots: Vec::new(),
        })
    }

    pub fn few_shot(
        identifier: IdentifierTerm,
        shots: Vec<(String, SentimentLabel)>,
    ) -> Result<PromptSpec, PromptError> {
        if shots.is_empty() || shots.len() > 3 {
            return Err(PromptError::InvalidShotCount { got: shots.len() });
        }
        Ok(PromptSpec {
            identifier,
            components: ComponentSet {
                definition: false,
                grounding: false,
                example: false,
            },
            shots,
        })
    }

    pub fn identifier(&self) -> IdentifierTerm {
        self.identifier
    }

    pub fn family(&self) -> PromptFamily {
        if !self.shots.is_empty() {
            PromptFamily::FewShot(self.shots.len())
        } else if self.components.is_empty() {
            PromptFamily::Base
        } else {
            PromptFamily::Aiap(self.components)
        }
    }

    /// Renders this spec for one sample text.
    pub fn render(&self, text: &str, spec: &InstructionSpec) -> Result<PromptText, PromptError> {
        match self.family() {
            PromptFamily::Base => build_base_prompt(text, self.identifier),
            PromptFamily::Aiap(components) => {
                build_aiap_prompt(text, self.identifier, spec, components)
            }
            PromptFamily::FewShot(_) => build_few_shot_prompt(text, self.identifier, &self.shots),
        }
    }
}
