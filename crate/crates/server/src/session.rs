//! Tutoring sessions: an append-only transcript of hints, model replies, and
//! judged code generations, capped at [`MAX_GENERATIONS`] generations.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use cpbench::agent::{
    extract_code_block, judge_summary, problem_text, render_prompt, Bindings, ClientError, LmClient, Message, Sampling,
    TemplateName,
};
use cpbench::corpus::{select_judge_tests, Problem};
use cpbench::judge::{Judge, JudgeReport};
use serde::{Deserialize, Serialize};

/// Code generations allowed per session.
pub const MAX_GENERATIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Solved,
    Exhausted,
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    HumanHint,
    ModelMessage,
    CodeGeneration,
    JudgeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Position in the transcript, starting at 0.
    pub seq: usize,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Extracted code of a `code_generation` event; absent when the reply
    /// had no code block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    /// Unit-test report for `code_generation` and `judge_result` events.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<JudgeReport>,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub problem_id: String,
    pub model_name: String,
    pub participant: String,
    pub transcript: Vec<Event>,
    pub generations_used: usize,
    pub status: SessionStatus,
    pub created_ms: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("no problem named {0:?}")]
    UnknownProblem(String),
    #[error("no model named {0:?} is configured")]
    UnknownModel(String),
    #[error("no session {0:?}")]
    UnknownSession(String),
    #[error("session is {0:?} and accepts no more input")]
    SessionClosed(SessionStatus),
    #[error("hint text is empty")]
    EmptyHint,
    #[error("all {MAX_GENERATIONS} code generations have been used")]
    GenerationBudgetExhausted,
    #[error("model call failed: {0}")]
    Client(#[from] ClientError),
    #[error("judging failed: {0}")]
    Judge(String),
    #[error("no finished sessions match the filter")]
    NoSessions,
    #[error("storing session: {0}")]
    Store(#[from] std::io::Error),
}

/// What one generation produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    /// 1-based generation number within the session.
    pub generation: usize,
    pub code: Option<String>,
    pub unit_report: Option<JudgeReport>,
    pub status: SessionStatus,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    pub fn new(session_id: String, problem_id: &str, model_name: &str, participant: &str) -> Self {
        Self {
            session_id,
            problem_id: problem_id.to_string(),
            model_name: model_name.to_string(),
            participant: participant.to_string(),
            transcript: Vec::new(),
            generations_used: 0,
            status: SessionStatus::Active,
            created_ms: now_ms(),
        }
    }

    fn ensure_active(&self) -> Result<(), SessionError> {
        match self.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Exhausted if self.generations_used >= MAX_GENERATIONS => {
                Err(SessionError::GenerationBudgetExhausted)
            }
            other => Err(SessionError::SessionClosed(other)),
        }
    }

    fn push(&mut self, kind: EventKind, text: Option<String>, code: Option<String>, report: Option<JudgeReport>) {
        self.transcript.push(Event {
            seq: self.transcript.len(),
            kind,
            text,
            code,
            report,
            timestamp_ms: now_ms(),
        });
    }

    pub fn post_hint(&mut self, text: &str) -> Result<(), SessionError> {
        match self.ensure_active() {
            Err(SessionError::GenerationBudgetExhausted) => {
                return Err(SessionError::SessionClosed(SessionStatus::Exhausted))
            }
            r => r?,
        }
        if text.trim().is_empty() {
            return Err(SessionError::EmptyHint);
        }
        self.push(EventKind::HumanHint, Some(text.to_string()), None, None);
        Ok(())
    }

    pub fn abandon(&mut self) -> Result<(), SessionError> {
        if self.status != SessionStatus::Active {
            return Err(SessionError::SessionClosed(self.status));
        }
        self.status = SessionStatus::Abandoned;
        Ok(())
    }

    /// The model's view: the solving prompt, then hints and judge feedback as
    /// user turns and earlier replies as assistant turns.
    pub fn conversation(&self, problem: &Problem) -> Vec<Message> {
        let text = problem_text(problem);
        let bindings = Bindings::from([("problem", text.as_str())]);
        let prompt = render_prompt(TemplateName::ZeroShot, &bindings).expect("zero-shot template binds {problem}");
        let mut messages = vec![Message::user(prompt)];
        for e in &self.transcript {
            let text = e.text.clone().unwrap_or_default();
            match e.kind {
                EventKind::HumanHint | EventKind::JudgeResult => messages.push(Message::user(text)),
                EventKind::ModelMessage => messages.push(Message::assistant(text)),
                EventKind::CodeGeneration => {}
            }
        }
        messages
    }

    /// Asks the model for code, judges it on unit tests, and checks hidden
    /// tests for the solved status. A failed model call leaves the session
    /// untouched.
    pub fn request_generation(
        &mut self,
        problem: &Problem,
        client: &dyn LmClient,
        judge: &Judge,
        sampling: &Sampling,
    ) -> Result<Generation, SessionError> {
        self.ensure_active()?;
        if self.generations_used >= MAX_GENERATIONS {
            return Err(SessionError::GenerationBudgetExhausted);
        }
        let reply = client.generate(&self.conversation(problem), sampling)?;
        let code = extract_code_block(&reply).ok().map(str::to_string);
        let (unit_report, solved) = match &code {
            Some(code) => {
                let unit = select_judge_tests(problem).map_err(|e| SessionError::Judge(e.to_string()))?;
                let policy = problem.compare_policy();
                let unit_report = judge
                    .judge_for(&problem.problem_id, code, &unit, problem.limits, policy)
                    .map_err(|e| SessionError::Judge(e.to_string()))?;
                let solved = if problem.hidden_tests.is_empty() {
                    unit_report.passed
                } else {
                    judge
                        .judge_for(&problem.problem_id, code, &problem.hidden_tests, problem.limits, policy)
                        .map_err(|e| SessionError::Judge(e.to_string()))?
                        .passed
                };
                (Some(unit_report), solved)
            }
            None => (None, false),
        };
        self.generations_used += 1;
        self.push(EventKind::ModelMessage, Some(reply), None, None);
        self.push(EventKind::CodeGeneration, None, code.clone(), unit_report.clone());
        self.push(
            EventKind::JudgeResult,
            Some(judge_summary(unit_report.as_ref())),
            None,
            unit_report.clone(),
        );
        if solved {
            self.status = SessionStatus::Solved;
        } else if self.generations_used >= MAX_GENERATIONS {
            self.status = SessionStatus::Exhausted;
        }
        Ok(Generation {
            generation: self.generations_used,
            code,
            unit_report,
            status: self.status,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFilter {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub problem: Option<String>,
}

impl SessionFilter {
    pub fn matches(&self, s: &Session) -> bool {
        self.model.as_ref().is_none_or(|m| *m == s.model_name)
            && self.participant.as_ref().is_none_or(|p| *p == s.participant)
            && self.problem.as_ref().is_none_or(|p| *p == s.problem_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSolveRate {
    pub model: String,
    pub solved: usize,
    pub finished: usize,
    /// Percentage rounded to one decimal.
    pub solve_rate: f64,
}

/// Per-model share of finished (non-active) sessions that were solved.
pub fn solve_rate<'a>(
    sessions: impl IntoIterator<Item = &'a Session>,
    filter: &SessionFilter,
) -> Result<Vec<ModelSolveRate>, SessionError> {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for s in sessions {
        if s.status == SessionStatus::Active || !filter.matches(s) {
            continue;
        }
        let c = counts.entry(s.model_name.as_str()).or_default();
        c.1 += 1;
        if s.status == SessionStatus::Solved {
            c.0 += 1;
        }
    }
    if counts.is_empty() {
        return Err(SessionError::NoSessions);
    }
    Ok(counts
        .into_iter()
        .map(|(model, (solved, finished))| ModelSolveRate {
            model: model.to_string(),
            solved,
            finished,
            solve_rate: (1000.0 * solved as f64 / finished as f64).round() / 10.0,
        })
        .collect())
}
