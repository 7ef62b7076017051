//! Prompt templates. Each is a plain-text file with `{name}` placeholders,
//! compiled into the binary and content-hashed for trace provenance.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    ZeroShot,
    FewShot,
    BrainstormThenSelect,
    SelfReflection,
    EpisodicRetrieval,
    EpisodicReflection,
    SelfJudge,
    /// Answer-format suffix appended to the self-judge prompt.
    SelfJudgeFormat,
    RandomSynth,
    CornerSynth,
    /// Problem and reference-solution block appended to synthesis prompts.
    SynthBinding,
}

impl TemplateName {
    pub const ALL: [TemplateName; 11] = [
        Self::ZeroShot,
        Self::FewShot,
        Self::BrainstormThenSelect,
        Self::SelfReflection,
        Self::EpisodicRetrieval,
        Self::EpisodicReflection,
        Self::SelfJudge,
        Self::SelfJudgeFormat,
        Self::RandomSynth,
        Self::CornerSynth,
        Self::SynthBinding,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZeroShot => "zero_shot",
            Self::FewShot => "few_shot",
            Self::BrainstormThenSelect => "brainstorm_then_select",
            Self::SelfReflection => "self_reflection",
            Self::EpisodicRetrieval => "episodic_retrieval",
            Self::EpisodicReflection => "episodic_reflection",
            Self::SelfJudge => "self_judge",
            Self::SelfJudgeFormat => "self_judge_format",
            Self::RandomSynth => "random_synth",
            Self::CornerSynth => "corner_synth",
            Self::SynthBinding => "synth_binding",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Self::ZeroShot => include_str!("../../templates/zero_shot.txt"),
            Self::FewShot => include_str!("../../templates/few_shot.txt"),
            Self::BrainstormThenSelect => {
                include_str!("../../templates/brainstorm_then_select.txt")
            }
            Self::SelfReflection => include_str!("../../templates/self_reflection.txt"),
            Self::EpisodicRetrieval => include_str!("../../templates/episodic_retrieval.txt"),
            Self::EpisodicReflection => include_str!("../../templates/episodic_reflection.txt"),
            Self::SelfJudge => include_str!("../../templates/self_judge.txt"),
            Self::SelfJudgeFormat => include_str!("../../templates/self_judge_format.txt"),
            Self::RandomSynth => include_str!("../../templates/random_synth.txt"),
            Self::CornerSynth => include_str!("../../templates/corner_synth.txt"),
            Self::SynthBinding => include_str!("../../templates/synth_binding.txt"),
        }
    }

    /// Hex SHA-256 of the template file.
    pub fn sha256(self) -> String {
        hex::encode(Sha256::digest(self.text().as_bytes()))
    }

    pub fn placeholders(self) -> BTreeSet<&'static str> {
        placeholders(self.text())
    }
}

impl std::fmt::Display for TemplateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateName {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| TemplateError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template {0:?}")]
    Unknown(String),
    #[error("unbound placeholders: {}", .0.join(", "))]
    UnboundPlaceholder(Vec<String>),
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").expect("valid regex"))
}

pub fn placeholders(template: &str) -> BTreeSet<&str> {
    placeholder_re()
        .captures_iter(template)
        .map(|c| c.get(1).expect("group").as_str())
        .collect()
}

pub type Bindings<'a> = BTreeMap<&'a str, &'a str>;

/// Substitutes every placeholder in one pass. Bound values are inserted
/// literally, so braces inside them are never expanded.
pub fn render_text(template: &str, bindings: &Bindings<'_>) -> Result<String, TemplateError> {
    let missing: Vec<String> = placeholders(template)
        .into_iter()
        .filter(|p| !bindings.contains_key(p))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(TemplateError::UnboundPlaceholder(missing));
    }
    Ok(placeholder_re()
        .replace_all(template, |c: &Captures<'_>| bindings[&c[1]].to_string())
        .into_owned())
}

pub fn render_prompt(name: TemplateName, bindings: &Bindings<'_>) -> Result<String, TemplateError> {
    render_text(name.text(), bindings)
}
