//! The multi-turn solving agent: prompt construction, execution feedback,
//! self-judging, and reflection.
//!
//! A solve run optionally drafts an answer to build a retrieval query,
//! generates an initial solution, judges it on the unit tests, asks the same
//! model to judge the result, and reflects on failures up to `i` times. The
//! final (or best) attempt is then run against the hidden tests.

mod client;
mod extract;
mod templates;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use client::{
    ClientError, HttpClient, HttpClientConfig, LmClient, Message, RateLimiter, Role, Sampling,
    ScriptFixture, ScriptRule, ScriptedClient, ScriptedReply,
};
pub use extract::{extract_code_block, strip_code_block, wrap_in_fence, NoCodeBlock};
pub use templates::{
    placeholders, render_prompt, render_text, Bindings, TemplateError, TemplateName,
};

use crate::corpus::{select_judge_tests, Problem, TestOrigin, Visibility};
use crate::judge::{Judge, JudgeReport, SandboxError};
use crate::retrieval::{make_query, retrieve, Composition, Index, RetrievalError, ScoredDoc};

/// Prompt wording used for the initial generation when no retrieval runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasePrompt {
    #[default]
    ZeroShot,
    FewShot,
    BrainstormThenSelect,
}

impl BasePrompt {
    pub fn template(self) -> TemplateName {
        match self {
            Self::ZeroShot => TemplateName::ZeroShot,
            Self::FewShot => TemplateName::FewShot,
            Self::BrainstormThenSelect => TemplateName::BrainstormThenSelect,
        }
    }
}

/// An inference technique: a base prompt plus any combination of semantic
/// retrieval, episodic retrieval, and self-reflection. Written and parsed as
/// labels such as `episodic_retrieval + self_reflection`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Technique {
    pub base: BasePrompt,
    pub semantic: bool,
    pub episodic: bool,
    pub reflection: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TechniqueError {
    #[error("unknown technique component {0:?}")]
    UnknownComponent(String),
    #[error("technique label {0:?} repeats a component or names two base prompts")]
    Conflict(String),
    #[error("{0} cannot be combined with retrieval")]
    BaseWithRetrieval(String),
}

impl Technique {
    pub const ZERO_SHOT: Technique = Technique {
        base: BasePrompt::ZeroShot,
        semantic: false,
        episodic: false,
        reflection: false,
    };

    pub fn retrieval(&self) -> bool {
        self.semantic || self.episodic
    }

    /// The ten labelled configurations of the results table, in row order.
    pub fn table_rows() -> Vec<Technique> {
        [
            "zero_shot",
            "brainstorm_then_select",
            "few_shot",
            "self_reflection",
            "semantic_retrieval",
            "semantic_retrieval + self_reflection",
            "episodic_retrieval",
            "semantic_retrieval + episodic_retrieval",
            "semantic_retrieval + episodic_retrieval + self_reflection",
            "episodic_retrieval + self_reflection",
        ]
        .into_iter()
        .map(|l| l.parse().expect("table labels parse"))
        .collect()
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        match self.base {
            BasePrompt::ZeroShot => {}
            BasePrompt::FewShot => parts.push("few_shot"),
            BasePrompt::BrainstormThenSelect => parts.push("brainstorm_then_select"),
        }
        if self.semantic {
            parts.push("semantic_retrieval");
        }
        if self.episodic {
            parts.push("episodic_retrieval");
        }
        if self.reflection {
            parts.push("self_reflection");
        }
        if parts.is_empty() {
            parts.push("zero_shot");
        }
        f.write_str(&parts.join(" + "))
    }
}

impl FromStr for Technique {
    type Err = TechniqueError;

    fn from_str(label: &str) -> Result<Self, Self::Err> {
        let mut t = Technique::ZERO_SHOT;
        let mut seen = std::collections::BTreeSet::new();
        let mut bases = 0;
        for part in label.split('+').map(str::trim) {
            if !seen.insert(part) {
                return Err(TechniqueError::Conflict(label.into()));
            }
            match part {
                "zero_shot" => bases += 1,
                "few_shot" => {
                    bases += 1;
                    t.base = BasePrompt::FewShot;
                }
                "brainstorm_then_select" => {
                    bases += 1;
                    t.base = BasePrompt::BrainstormThenSelect;
                }
                "semantic_retrieval" => t.semantic = true,
                "episodic_retrieval" => t.episodic = true,
                "self_reflection" => t.reflection = true,
                other => return Err(TechniqueError::UnknownComponent(other.into())),
            }
        }
        if bases > 1 {
            return Err(TechniqueError::Conflict(label.into()));
        }
        if t.retrieval() && t.base != BasePrompt::ZeroShot {
            return Err(TechniqueError::BaseWithRetrieval(label.into()));
        }
        Ok(t)
    }
}

impl Serialize for Technique {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Technique {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_p() -> usize {
    2
}

fn default_i() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub technique: Technique,
    /// Documents retrieved from each active store.
    #[serde(default = "default_p")]
    pub p: usize,
    /// Maximum reflections after the initial attempt. Only used when the
    /// technique includes self-reflection.
    #[serde(default = "default_i")]
    pub i: usize,
    pub model_name: String,
    #[serde(default)]
    pub composition: Composition,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("p must be at least 1 when retrieval is enabled")]
    ZeroP,
    #[error("technique {0} needs an episodic index")]
    MissingEpisodicIndex(String),
    #[error("technique {0} needs a semantic index")]
    MissingSemanticIndex(String),
}

impl PipelineConfig {
    pub fn new(technique: Technique, model_name: impl Into<String>) -> Self {
        Self {
            technique,
            p: default_p(),
            i: default_i(),
            model_name: model_name.into(),
            composition: Composition::default(),
            sampling: Sampling::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.technique.retrieval() && self.p == 0 {
            return Err(ConfigError::ZeroP);
        }
        Ok(())
    }

    /// Reflection budget actually used by the loop.
    pub fn reflections(&self) -> usize {
        if self.technique.reflection {
            self.i
        } else {
            0
        }
    }

    /// Hex SHA-256 of the canonical JSON form; keys checkpoints.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeDecision {
    pub accepted: bool,
    /// Whether the model's own verdict agreed; `None` when it could not be
    /// parsed.
    pub lm_concurs: Option<bool>,
    pub score_text: String,
    pub tests_passed: usize,
    pub tests_total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub attempt_index: usize,
    pub prompt: String,
    pub raw_response: String,
    pub extracted_code: Option<String>,
    pub judge_report: Option<JudgeReport>,
    pub judge_decision: Option<JudgeDecision>,
}

impl Attempt {
    fn new(attempt_index: usize, prompt: String, raw_response: String) -> Self {
        let extracted_code = extract_code_block(&raw_response).ok().map(str::to_string);
        Self {
            attempt_index,
            prompt,
            raw_response,
            extracted_code,
            judge_report: None,
            judge_decision: None,
        }
    }

    pub fn accepted(&self) -> bool {
        self.judge_decision.as_ref().is_some_and(|d| d.accepted)
    }

    fn tests_passed(&self) -> Option<usize> {
        self.judge_report.as_ref().map(JudgeReport::tests_passed)
    }
}

/// Ordered, append-only record of the attempts in one solve run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReflectionBuffer {
    attempts: Vec<Attempt>,
}

impl ReflectionBuffer {
    pub fn attempts(&self) -> &[Attempt] {
        &self.attempts
    }

    pub fn len(&self) -> usize {
        self.attempts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attempts.is_empty()
    }

    pub fn latest(&self) -> Option<&Attempt> {
        self.attempts.last()
    }

    fn push(&mut self, prompt: String, raw_response: String) -> &mut Attempt {
        let index = self.attempts.len();
        self.attempts
            .push(Attempt::new(index, prompt, raw_response));
        self.attempts.last_mut().expect("just pushed")
    }

    fn latest_mut(&mut self) -> Option<&mut Attempt> {
        self.attempts.last_mut()
    }

    /// Text bound to the reflection template: every attempt's code and how
    /// it fared.
    pub fn render(&self) -> String {
        self.attempts
            .iter()
            .map(|a| {
                let code = match &a.extracted_code {
                    Some(c) => wrap_in_fence(c),
                    None => "No code block was found in this response.".to_string(),
                };
                format!(
                    "[ATTEMPT {}]\n{code}\n[RESULT]\n{}",
                    a.attempt_index + 1,
                    judge_summary(a.judge_report.as_ref())
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Draft,
    Initial,
    Reflection,
    SelfJudge,
    Synthesis,
}

impl Purpose {
    /// Calls that ask the model for a solution.
    pub fn is_solution_generation(self) -> bool {
        matches!(self, Self::Draft | Self::Initial | Self::Reflection)
    }
}

/// One prompt/response pair sent to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub seq: usize,
    pub purpose: Purpose,
    pub template: TemplateName,
    pub prompt: String,
    pub response: String,
}

/// A client plus the exchanges made through it.
pub struct Session<'a> {
    client: &'a dyn LmClient,
    sampling: &'a Sampling,
    pub exchanges: Vec<Exchange>,
}

impl<'a> Session<'a> {
    pub fn new(client: &'a dyn LmClient, sampling: &'a Sampling) -> Self {
        Self {
            client,
            sampling,
            exchanges: Vec::new(),
        }
    }

    pub fn call(
        &mut self,
        purpose: Purpose,
        template: TemplateName,
        prompt: String,
    ) -> Result<String, ClientError> {
        let response = self
            .client
            .generate(&[Message::user(prompt.clone())], self.sampling)?;
        self.exchanges.push(Exchange {
            seq: self.exchanges.len(),
            purpose,
            template,
            prompt,
            response: response.clone(),
        });
        Ok(response)
    }

    pub fn model_name(&self) -> &str {
        self.client.model_name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solved,
    Failed,
    NoCode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub problem_id: String,
    pub config: PipelineConfig,
    pub config_hash: String,
    pub model: String,
    /// SHA-256 of every template file used by this run.
    pub template_hashes: BTreeMap<TemplateName, String>,
    pub draft: Option<Attempt>,
    pub query: Option<String>,
    pub retrieved: Vec<ScoredDoc>,
    pub buffer: ReflectionBuffer,
    pub exchanges: Vec<Exchange>,
    pub final_attempt: Option<usize>,
    pub final_code: Option<String>,
    pub hidden_report: Option<JudgeReport>,
    pub outcome: Outcome,
    /// Set when the run was cut short by a client error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl SolveTrace {
    fn new(problem: &Problem, config: &PipelineConfig, model: &str) -> Self {
        Self {
            problem_id: problem.problem_id.clone(),
            config: config.clone(),
            config_hash: config.config_hash(),
            model: model.to_string(),
            template_hashes: BTreeMap::new(),
            draft: None,
            query: None,
            retrieved: Vec::new(),
            buffer: ReflectionBuffer::default(),
            exchanges: Vec::new(),
            final_attempt: None,
            final_code: None,
            hidden_report: None,
            outcome: Outcome::Failed,
            aborted: None,
        }
    }

    pub fn solution_generations(&self) -> usize {
        self.exchanges
            .iter()
            .filter(|e| e.purpose.is_solution_generation())
            .count()
    }

    pub fn reflections(&self) -> usize {
        self.exchanges
            .iter()
            .filter(|e| e.purpose == Purpose::Reflection)
            .count()
    }

    /// Copy with all timing and memory measurements zeroed.
    pub fn without_measurements(&self) -> Self {
        let mut t = self.clone();
        let strip = |a: &mut Attempt| {
            if let Some(r) = &mut a.judge_report {
                *r = r.without_measurements();
            }
        };
        t.buffer.attempts.iter_mut().for_each(strip);
        if let Some(r) = &mut t.hidden_report {
            *r = r.without_measurements();
        }
        t
    }

    /// Deterministic JSON: measurements removed, keys in declaration order.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.without_measurements()).expect("trace serializes")
    }

    /// One JSON object per exchange, newline-terminated.
    pub fn exchanges_jsonl(&self) -> String {
        self.exchanges
            .iter()
            .map(|e| {
                let mut line = serde_json::to_string(&serde_json::json!({
                    "problem_id": self.problem_id,
                    "config_hash": self.config_hash,
                    "exchange": e,
                }))
                .expect("exchange serializes");
                line.push('\n');
                line
            })
            .collect()
    }

    fn note_template(&mut self, t: TemplateName) {
        self.template_hashes.entry(t).or_insert_with(|| t.sha256());
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("client failed on {problem_id}: {source}")]
    Client {
        problem_id: String,
        source: ClientError,
        partial: Box<SolveTrace>,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("judge fault: {0}")]
    Sandbox(#[from] SandboxError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Document stores available to a solve run.
#[derive(Debug, Default, Clone, Copy)]
pub struct Retriever<'a> {
    pub episodic: Option<&'a Index>,
    pub semantic: Option<&'a Index>,
    /// Exclude the problem being solved from episodic results.
    pub leave_one_out: bool,
}

impl<'a> Retriever<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn episodic(index: &'a Index) -> Self {
        Self {
            episodic: Some(index),
            semantic: None,
            leave_one_out: true,
        }
    }
}

const SNIPPET_CAP: usize = 300;

fn snippet(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    let trimmed = text.trim_end();
    if trimmed.len() <= SNIPPET_CAP {
        return trimmed.to_string();
    }
    let mut end = SNIPPET_CAP;
    while !trimmed.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &trimmed[..end])
}

/// The problem as shown to the model: the statement, then any synthesized
/// unit tests. Hidden tests never appear.
pub fn problem_text(problem: &Problem) -> String {
    let mut text = problem.statement.trim_end().to_string();
    let extra: Vec<_> = problem
        .unit_tests
        .iter()
        .filter(|t| t.origin == TestOrigin::Synthesized && t.visibility == Visibility::Unit)
        .collect();
    if !extra.is_empty() {
        text.push_str("\n\nAdditional unit tests:");
        for t in extra {
            text.push_str(&format!(
                "\n\nInput:\n{}\nOutput:\n{}",
                snippet(&t.input),
                snippet(&t.expected_output)
            ));
        }
    }
    text
}

/// Per-test execution outcomes as fed back to the model.
pub fn judge_summary(report: Option<&JudgeReport>) -> String {
    let Some(report) = report else {
        return "Not judged: the response contained no code block.".to_string();
    };
    let mut out = format!(
        "Passed {} of {} unit tests.",
        report.tests_passed(),
        report.tests_total()
    );
    if let Some(diag) = &report.compile_diagnostics {
        out.push_str(&format!(
            "\nCompilation failed:\n{}",
            snippet(diag.as_bytes())
        ));
        return out;
    }
    for t in &report.per_test {
        out.push_str(&format!("\n- {}: {}", t.test_id, t.verdict().short()));
    }
    out
}

fn solution_and_tests(problem: &Problem, code: &str, report: &JudgeReport) -> String {
    let tests: BTreeMap<&str, &crate::corpus::TestCase> = problem
        .unit_tests
        .iter()
        .map(|t| (t.test_id.as_str(), t))
        .collect();
    let mut out = format!(
        "{}\n\nTest cases ({} of {} passed):",
        wrap_in_fence(code),
        report.tests_passed(),
        report.tests_total()
    );
    if let Some(diag) = &report.compile_diagnostics {
        out.push_str(&format!(
            "\nCompilation failed:\n{}",
            snippet(diag.as_bytes())
        ));
    }
    for r in &report.per_test {
        out.push_str(&format!(
            "\n\n[{}] {}",
            r.test_id,
            if r.passed() { "PASSED" } else { "FAILED" }
        ));
        out.push_str(&format!(" ({})", r.verdict().short()));
        if let Some(tc) = tests.get(r.test_id.as_str()) {
            out.push_str(&format!(
                "\nInput:\n{}\nExpected output:\n{}",
                snippet(&tc.input),
                snippet(&tc.expected_output)
            ));
            if !r.passed() && r.result.verdict != crate::judge::Verdict::CompileError {
                out.push_str(&format!("\nActual output:\n{}", snippet(&r.result.stdout)));
            }
        }
    }
    out
}

fn retrieval_text(docs: &[ScoredDoc]) -> String {
    docs.iter()
        .enumerate()
        .map(|(k, d)| format!("[SIMILAR PROBLEM {}]\n{}", k + 1, d.document.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Reads the model's verdict from a self-judge response: the last
/// `Score: X/Y` line (concurs iff X = Y > 0), else a `Verdict: ACCEPT` or
/// `REJECT` line. `None` when neither is present.
pub fn parse_self_judge(response: &str) -> Option<bool> {
    static SCORE: OnceLock<Regex> = OnceLock::new();
    static VERDICT: OnceLock<Regex> = OnceLock::new();
    let score = SCORE
        .get_or_init(|| Regex::new(r"(?i)score\s*[:=]\s*\**\s*(\d+)\s*/\s*(\d+)").expect("regex"));
    if let Some(c) = score.captures_iter(response).last() {
        let x: u64 = c[1].parse().ok()?;
        let y: u64 = c[2].parse().ok()?;
        return Some(y > 0 && x == y);
    }
    let verdict = VERDICT
        .get_or_init(|| Regex::new(r"(?i)verdict\s*:\s*\**\s*(accept|reject)").expect("regex"));
    verdict
        .captures_iter(response)
        .last()
        .map(|c| c[1].eq_ignore_ascii_case("accept"))
}

/// Asks the model to judge an attempt given its unit-test outcomes.
/// Acceptance needs both a passing report and the model's agreement; an
/// unparseable answer defers to the report.
pub fn self_judge(
    session: &mut Session<'_>,
    problem: &Problem,
    code: &str,
    report: &JudgeReport,
) -> Result<JudgeDecision, ClientError> {
    let description = problem_text(problem);
    let tests = solution_and_tests(problem, code, report);
    let bindings = Bindings::from([
        ("coding", "coding"),
        ("description", description.as_str()),
        ("solution_and_tests", tests.as_str()),
    ]);
    let mut prompt =
        render_prompt(TemplateName::SelfJudge, &bindings).expect("self-judge bindings complete");
    prompt.push_str(TemplateName::SelfJudgeFormat.text());
    let response = session.call(Purpose::SelfJudge, TemplateName::SelfJudge, prompt)?;
    let lm_concurs = parse_self_judge(&response);
    Ok(JudgeDecision {
        accepted: report.passed && lm_concurs.unwrap_or(true),
        lm_concurs,
        score_text: response,
        tests_passed: report.tests_passed(),
        tests_total: report.tests_total(),
    })
}

/// A first answer used only to build the retrieval query. Never judged.
pub fn generate_draft(
    session: &mut Session<'_>,
    problem: &Problem,
) -> Result<Attempt, ClientError> {
    let description = problem_text(problem);
    let prompt = render_prompt(
        TemplateName::ZeroShot,
        &Bindings::from([("problem", description.as_str())]),
    )
    .expect("zero-shot bindings complete");
    let response = session.call(Purpose::Draft, TemplateName::ZeroShot, prompt.clone())?;
    Ok(Attempt::new(0, prompt, response))
}

/// Renders the reflection prompt for the current buffer and appends the
/// model's new attempt. With retrieved documents the combined template is
/// used, bound to the latest attempt and its judge result.
///
/// # Panics
/// If `buffer` is empty.
pub fn reflect<'b>(
    session: &mut Session<'_>,
    problem: &Problem,
    buffer: &'b mut ReflectionBuffer,
    retrieved: Option<&[ScoredDoc]>,
) -> Result<&'b Attempt, ClientError> {
    let latest = buffer.latest().expect("reflect needs at least one attempt");
    let description = problem_text(problem);
    let (template, prompt) = match retrieved {
        Some(docs) => {
            let rt = retrieval_text(docs);
            let judge_response = judge_summary(latest.judge_report.as_ref());
            let bindings = Bindings::from([
                ("description", description.as_str()),
                ("retrieval_text", rt.as_str()),
                ("original_response", latest.raw_response.as_str()),
                ("judge_response", judge_response.as_str()),
            ]);
            (
                TemplateName::EpisodicReflection,
                render_prompt(TemplateName::EpisodicReflection, &bindings),
            )
        }
        None => {
            let rb = buffer.render();
            let bindings = Bindings::from([
                ("description", description.as_str()),
                ("reflection_buffer", rb.as_str()),
            ]);
            (
                TemplateName::SelfReflection,
                render_prompt(TemplateName::SelfReflection, &bindings),
            )
        }
    };
    let prompt = prompt.expect("reflection bindings complete");
    let response = session.call(Purpose::Reflection, template, prompt.clone())?;
    Ok(buffer.push(prompt, response))
}

/// Runs the full pipeline for one problem.
pub fn solve(
    problem: &Problem,
    config: &PipelineConfig,
    client: &dyn LmClient,
    judge: &Judge,
    retriever: Retriever<'_>,
) -> Result<SolveTrace, SolveError> {
    config.validate()?;
    let t = config.technique;
    if t.episodic && retriever.episodic.is_none() {
        return Err(ConfigError::MissingEpisodicIndex(t.to_string()).into());
    }
    if t.semantic && retriever.semantic.is_none() {
        return Err(ConfigError::MissingSemanticIndex(t.to_string()).into());
    }
    let judge_tests = select_judge_tests(problem)?;
    let mut session = Session::new(client, &config.sampling);
    let mut trace = SolveTrace::new(problem, config, client.model_name());
    match run_pipeline(
        problem,
        config,
        &mut session,
        judge,
        retriever,
        &judge_tests,
        &mut trace,
    ) {
        Ok(()) => {
            trace.exchanges = session.exchanges;
            Ok(trace)
        }
        Err(PipelineError::Client(source)) => {
            trace.exchanges = session.exchanges;
            trace.aborted = Some(source.to_string());
            trace.outcome = Outcome::Failed;
            Err(SolveError::Client {
                problem_id: problem.problem_id.clone(),
                source,
                partial: Box::new(trace),
            })
        }
        Err(PipelineError::Other(e)) => Err(e),
    }
}

enum PipelineError {
    Client(ClientError),
    Other(SolveError),
}

impl From<ClientError> for PipelineError {
    fn from(e: ClientError) -> Self {
        Self::Client(e)
    }
}

fn other<E: Into<SolveError>>(e: E) -> PipelineError {
    PipelineError::Other(e.into())
}

fn run_pipeline(
    problem: &Problem,
    config: &PipelineConfig,
    session: &mut Session<'_>,
    judge: &Judge,
    retriever: Retriever<'_>,
    judge_tests: &[crate::corpus::TestCase],
    trace: &mut SolveTrace,
) -> Result<(), PipelineError> {
    let t = config.technique;
    let description = problem_text(problem);

    let retrieved = if t.retrieval() {
        trace.note_template(TemplateName::ZeroShot);
        let draft = generate_draft(session, problem)?;
        let solution = strip_code_block(&draft.raw_response);
        let query = make_query(
            &problem.statement,
            Some(solution.as_str()).filter(|s| !s.is_empty()),
            draft.extracted_code.as_deref(),
            config.composition,
        )
        .or_else(|_| make_query(&problem.statement, None, None, Composition::DescriptionOnly))
        .map_err(other)?;
        let exclude = retriever
            .leave_one_out
            .then_some(problem.problem_id.as_str());
        let mut docs = Vec::new();
        if let Some(index) = retriever.episodic.filter(|_| t.episodic) {
            docs.extend(retrieve(index, &query, config.p, exclude));
        }
        if let Some(index) = retriever.semantic.filter(|_| t.semantic) {
            docs.extend(retrieve(index, &query, config.p, None));
        }
        trace.draft = Some(draft);
        trace.query = Some(query.text);
        trace.retrieved = docs.clone();
        Some(docs)
    } else {
        None
    };

    let (template, prompt) = match &retrieved {
        Some(docs) => {
            let rt = retrieval_text(docs);
            let b = Bindings::from([
                ("retrieval_text", rt.as_str()),
                ("description", description.as_str()),
            ]);
            (
                TemplateName::EpisodicRetrieval,
                render_prompt(TemplateName::EpisodicRetrieval, &b),
            )
        }
        None => {
            let name = t.base.template();
            (
                name,
                render_prompt(name, &Bindings::from([("problem", description.as_str())])),
            )
        }
    };
    let prompt = prompt.map_err(other)?;
    trace.note_template(template);
    let response = session.call(Purpose::Initial, template, prompt.clone())?;
    trace.buffer.push(prompt, response);

    let budget = config.reflections();
    let mut reflections = 0;
    loop {
        let latest = trace.buffer.latest().expect("buffer non-empty");
        if let Some(code) = latest.extracted_code.clone() {
            let report = judge
                .judge_for(
                    &problem.problem_id,
                    &code,
                    judge_tests,
                    problem.limits,
                    problem.compare_policy(),
                )
                .map_err(other)?;
            let decision = if t.reflection {
                trace.note_template(TemplateName::SelfJudge);
                trace.note_template(TemplateName::SelfJudgeFormat);
                self_judge(session, problem, &code, &report)?
            } else {
                JudgeDecision {
                    accepted: report.passed,
                    lm_concurs: None,
                    score_text: String::new(),
                    tests_passed: report.tests_passed(),
                    tests_total: report.tests_total(),
                }
            };
            let attempt = trace.buffer.latest_mut().expect("buffer non-empty");
            attempt.judge_report = Some(report);
            attempt.judge_decision = Some(decision);
        }
        if trace.buffer.latest().is_some_and(Attempt::accepted) || reflections >= budget {
            break;
        }
        let rt = retrieved.as_deref();
        trace.note_template(if rt.is_some() {
            TemplateName::EpisodicReflection
        } else {
            TemplateName::SelfReflection
        });
        reflect(session, problem, &mut trace.buffer, rt)?;
        reflections += 1;
    }

    let attempts = trace.buffer.attempts();
    let chosen = match attempts.last().filter(|a| a.accepted()) {
        Some(a) => Some(a),
        None => attempts
            .iter()
            .filter(|a| a.extracted_code.is_some())
            .max_by_key(|a| (a.tests_passed().unwrap_or(0), a.attempt_index)),
    };
    let Some(chosen) = chosen else {
        trace.outcome = Outcome::NoCode;
        return Ok(());
    };
    let code = chosen.extracted_code.clone().expect("filtered on code");
    trace.final_attempt = Some(chosen.attempt_index);
    let hidden = judge
        .judge_for(
            &problem.problem_id,
            &code,
            &problem.hidden_tests,
            problem.limits,
            problem.compare_policy(),
        )
        .map_err(other)?;
    trace.outcome = if hidden.passed {
        Outcome::Solved
    } else {
        Outcome::Failed
    };
    trace.final_code = Some(code);
    trace.hidden_report = Some(hidden);
    Ok(())
}
