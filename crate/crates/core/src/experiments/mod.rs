//! Benchmark orchestration: runs solve pipelines over a corpus and a grid of
//! configurations, checkpoints every finished trace, and aggregates pass@1
//! tables, parameter sweeps, and error distributions.

mod checkpoint;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use checkpoint::{read_traces, Checkpoint, LogRecord};
pub use report::{
    emit_report, error_markdown, relative_delta, sweep_markdown, ReportFormat, ReportOptions,
    INCOMPLETE,
};

use crate::agent::{solve, LmClient, Outcome, PipelineConfig, Retriever, SolveError, SolveTrace};
use crate::corpus::{Corpus, Problem};
use crate::judge::{Judge, Verdict};
use crate::retrieval::{build_episodic_documents, EpisodicAblation, Index, RetrievalError};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("no model named {0:?} is configured")]
    UnknownModel(String),
    #[error("two configurations share the cell ({technique}, {model})")]
    DuplicateCell { technique: String, model: String },
    #[error("parameter {param} does not apply to technique {technique}")]
    NotApplicable {
        param: SweepParam,
        technique: String,
    },
    #[error("error distribution needs at least one trace")]
    NoTraces,
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named clients. Every solve run gets a [`LmClient::fresh`] copy.
#[derive(Default, Clone)]
pub struct ModelRegistry {
    models: BTreeMap<String, Arc<dyn LmClient>>,
}

impl std::fmt::Debug for ModelRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.models.keys()).finish()
    }
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, client: Arc<dyn LmClient>) {
        self.models.insert(name.into(), client);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn client(&self, name: &str) -> Result<Arc<dyn LmClient>, BenchError> {
        self.models
            .get(name)
            .map(|c| c.fresh())
            .ok_or_else(|| BenchError::UnknownModel(name.to_string()))
    }
}

/// Which problems are evaluated and which are retrievable.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EvalMode {
    /// Every problem is evaluated; the episodic store holds all problems and
    /// excludes the one being solved.
    #[default]
    LeaveOneOut,
    /// Only `test` problems are evaluated; the episodic store holds only the
    /// `train` problems.
    TrainTest {
        train: Vec<String>,
        test: Vec<String>,
    },
}

/// Everything a benchmark needs besides the configurations.
pub struct BenchContext {
    pub corpus: Corpus,
    pub judge: Judge,
    pub models: ModelRegistry,
    pub mode: EvalMode,
    pub episodic: Option<Index>,
    pub semantic: Option<Index>,
}

impl BenchContext {
    /// Builds the episodic index for `mode` from the corpus.
    pub fn new(
        corpus: Corpus,
        judge: Judge,
        models: ModelRegistry,
        mode: EvalMode,
        ablation: EpisodicAblation,
    ) -> Result<Self, BenchError> {
        let docs = build_episodic_documents(&corpus, ablation);
        let docs = match &mode {
            EvalMode::LeaveOneOut => docs,
            EvalMode::TrainTest { train, .. } => {
                let train: BTreeSet<&str> = train.iter().map(String::as_str).collect();
                docs.into_iter()
                    .filter(|d| {
                        d.source_problem_id
                            .as_deref()
                            .is_some_and(|p| train.contains(p))
                    })
                    .collect()
            }
        };
        let episodic = if docs.is_empty() {
            None
        } else {
            Some(Index::build(docs)?)
        };
        Ok(Self {
            corpus,
            judge,
            models,
            mode,
            episodic,
            semantic: None,
        })
    }

    pub fn with_semantic(mut self, index: Index) -> Self {
        self.semantic = Some(index);
        self
    }

    pub fn eval_problems(&self) -> Vec<&Problem> {
        match &self.mode {
            EvalMode::LeaveOneOut => self.corpus.problems.iter().collect(),
            EvalMode::TrainTest { test, .. } => {
                let test: BTreeSet<&str> = test.iter().map(String::as_str).collect();
                self.corpus
                    .problems
                    .iter()
                    .filter(|p| test.contains(p.problem_id.as_str()))
                    .collect()
            }
        }
    }

    pub fn retriever(&self) -> Retriever<'_> {
        Retriever {
            episodic: self.episodic.as_ref(),
            semantic: self.semantic.as_ref(),
            leave_one_out: self.mode == EvalMode::LeaveOneOut,
        }
    }

    /// Solves one problem under `config` with a fresh client.
    pub fn solve_one(
        &self,
        problem: &Problem,
        config: &PipelineConfig,
    ) -> Result<SolveTrace, BenchError> {
        let client = self.models.client(&config.model_name)?;
        Ok(solve(
            problem,
            config,
            &*client,
            &self.judge,
            self.retriever(),
        )?)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    /// Problems solved concurrently.
    pub workers: usize,
    pub checkpoint: Option<PathBuf>,
    /// Stop after this many new (not resumed) traces; simulates an
    /// interruption.
    pub max_new_solves: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRef {
    pub problem_id: String,
    pub config_hash: String,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub technique: String,
    pub model: String,
    pub config_hash: String,
    pub solved: usize,
    pub total: usize,
    pub traces: Vec<TraceRef>,
    /// Set when the cell was cut short by a client error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl Cell {
    pub fn complete(&self) -> bool {
        self.aborted.is_none() && self.traces.len() == self.total
    }

    /// `100 * solved / total`, or `None` while incomplete.
    pub fn pass1(&self) -> Option<f64> {
        (self.complete() && self.total > 0).then(|| 100.0 * self.solved as f64 / self.total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub corpus_fingerprint: String,
    pub cells: Vec<Cell>,
}

impl ResultsTable {
    pub fn cell(&self, technique: &str, model: &str) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.technique == technique && c.model == model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub table: ResultsTable,
    /// Every finished trace, ordered by configuration then problem.
    pub traces: Vec<SolveTrace>,
    pub interrupted: bool,
}

fn table_from(
    ctx: &BenchContext,
    configs: &[PipelineConfig],
    done: &BTreeMap<(String, String), SolveTrace>,
    aborted: &BTreeMap<usize, String>,
) -> (ResultsTable, Vec<SolveTrace>) {
    let problems = ctx.eval_problems();
    let mut traces = Vec::new();
    let cells = configs
        .iter()
        .enumerate()
        .map(|(ci, config)| {
            let hash = config.config_hash();
            let mut refs = Vec::new();
            for p in &problems {
                if let Some(t) = done.get(&(p.problem_id.clone(), hash.clone())) {
                    refs.push(TraceRef {
                        problem_id: p.problem_id.clone(),
                        config_hash: hash.clone(),
                        outcome: t.outcome,
                    });
                    traces.push(t.clone());
                }
            }
            Cell {
                technique: config.technique.to_string(),
                model: config.model_name.clone(),
                solved: refs.iter().filter(|r| r.outcome == Outcome::Solved).count(),
                total: problems.len(),
                config_hash: hash,
                traces: refs,
                aborted: aborted.get(&ci).cloned(),
            }
        })
        .collect();
    (
        ResultsTable {
            corpus_fingerprint: ctx.corpus.fingerprint(),
            cells,
        },
        traces,
    )
}

/// Runs every configuration over every evaluated problem. Traces already in
/// the checkpoint are reused; new ones are appended as they finish. A client
/// error aborts only its cell.
pub fn run_benchmark(
    ctx: &BenchContext,
    configs: &[PipelineConfig],
    options: &BenchOptions,
) -> Result<BenchRun, BenchError> {
    let mut cells_seen = BTreeSet::new();
    for c in configs {
        if !ctx.models.models.contains_key(&c.model_name) {
            return Err(BenchError::UnknownModel(c.model_name.clone()));
        }
        if !cells_seen.insert((c.technique.to_string(), c.model_name.clone())) {
            return Err(BenchError::DuplicateCell {
                technique: c.technique.to_string(),
                model: c.model_name.clone(),
            });
        }
        c.validate().map_err(SolveError::from)?;
    }
    let checkpoint = options
        .checkpoint
        .as_deref()
        .map(Checkpoint::open)
        .transpose()?;
    let mut done: BTreeMap<(String, String), SolveTrace> = checkpoint
        .as_ref()
        .map(|c| c.finished().clone())
        .unwrap_or_default();

    let problems = ctx.eval_problems();
    let jobs: Vec<(usize, &Problem)> = configs
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            let hash = c.config_hash();
            problems
                .iter()
                .filter(|p| !done.contains_key(&(p.problem_id.clone(), hash.clone())))
                .map(|p| (ci, *p))
                .collect::<Vec<_>>()
        })
        .collect();

    let next = AtomicUsize::new(0);
    let new_solves = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let aborted: Mutex<BTreeMap<usize, String>> = Mutex::new(BTreeMap::new());
    let finished: Mutex<Vec<SolveTrace>> = Mutex::new(Vec::new());
    let fatal: Mutex<Option<BenchError>> = Mutex::new(None);
    let checkpoint = checkpoint.map(Mutex::new);

    let worker = || loop {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(&(ci, problem)) = jobs.get(i) else {
            break;
        };
        if aborted.lock().expect("lock").contains_key(&ci) {
            continue;
        }
        if let Some(max) = options.max_new_solves {
            if new_solves.fetch_add(1, Ordering::SeqCst) >= max {
                stop.store(true, Ordering::SeqCst);
                break;
            }
        }
        match ctx.solve_one(problem, &configs[ci]) {
            Ok(trace) => {
                if let Some(cp) = &checkpoint {
                    if let Err(e) = cp.lock().expect("lock").append(&trace) {
                        *fatal.lock().expect("lock") = Some(e);
                        stop.store(true, Ordering::SeqCst);
                    }
                }
                finished.lock().expect("lock").push(trace);
            }
            Err(BenchError::Solve(SolveError::Client {
                problem_id, source, ..
            })) => {
                log::warn!(
                    "cell {} aborted on {problem_id}: {source}",
                    configs[ci].technique
                );
                aborted
                    .lock()
                    .expect("lock")
                    .entry(ci)
                    .or_insert_with(|| format!("{problem_id}: {source}"));
            }
            Err(e) => {
                *fatal.lock().expect("lock") = Some(e);
                stop.store(true, Ordering::SeqCst);
            }
        }
    };
    let width = options.workers.max(1).min(jobs.len().max(1));
    if width == 1 {
        worker();
    } else {
        std::thread::scope(|s| {
            for _ in 0..width {
                s.spawn(worker);
            }
        });
    }
    if let Some(e) = fatal.into_inner().expect("lock") {
        return Err(e);
    }
    for t in finished.into_inner().expect("lock") {
        done.insert((t.problem_id.clone(), t.config_hash.clone()), t);
    }
    let aborted = aborted.into_inner().expect("lock");
    let (table, traces) = table_from(ctx, configs, &done, &aborted);
    Ok(BenchRun {
        table,
        traces,
        interrupted: stop.into_inner(),
    })
}

/// Parameter varied by [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    P,
    I,
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::P => "p",
            Self::I => "i",
        })
    }
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "p" => Ok(Self::P),
            "i" => Ok(Self::I),
            other => Err(format!(
                "unknown sweep parameter {other:?} (expected p or i)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: usize,
    pub cell: Cell,
}

/// One benchmark per value of `param`, everything else fixed.
pub fn sweep(
    ctx: &BenchContext,
    base: &PipelineConfig,
    param: SweepParam,
    values: &[usize],
    options: &BenchOptions,
) -> Result<Vec<SweepRow>, BenchError> {
    let applies = match param {
        SweepParam::P => base.technique.retrieval(),
        SweepParam::I => base.technique.reflection,
    };
    if !applies {
        return Err(BenchError::NotApplicable {
            param,
            technique: base.technique.to_string(),
        });
    }
    values
        .iter()
        .map(|&v| {
            let mut config = base.clone();
            match param {
                SweepParam::P => config.p = v,
                SweepParam::I => config.i = v,
            }
            let run = run_benchmark(ctx, std::slice::from_ref(&config), options)?;
            let cell = run
                .table
                .cells
                .into_iter()
                .next()
                .expect("one config, one cell");
            Ok(SweepRow { value: v, cell })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    WrongAnswer,
    TimeLimit,
    MemoryLimit,
    RuntimeError,
    SyntaxOther,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        Self::WrongAnswer,
        Self::TimeLimit,
        Self::MemoryLimit,
        Self::RuntimeError,
        Self::SyntaxOther,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::WrongAnswer => "Wrong Ans.",
            Self::TimeLimit => "TLE",
            Self::MemoryLimit => "MLE",
            Self::RuntimeError => "Runtime",
            Self::SyntaxOther => "Syntax + Other",
        }
    }
}

/// Category of a finished trace, `None` when solved.
pub fn classify(trace: &SolveTrace) -> Option<ErrorCategory> {
    match trace.outcome {
        Outcome::Solved => None,
        Outcome::NoCode => Some(ErrorCategory::SyntaxOther),
        Outcome::Failed => Some(
            match trace
                .hidden_report
                .as_ref()
                .and_then(|r| r.first_failing_verdict())
            {
                Some(Verdict::WrongAnswer) => ErrorCategory::WrongAnswer,
                Some(Verdict::TimeLimit) => ErrorCategory::TimeLimit,
                Some(Verdict::MemoryLimit) => ErrorCategory::MemoryLimit,
                Some(Verdict::RuntimeError) => ErrorCategory::RuntimeError,
                _ => ErrorCategory::SyntaxOther,
            },
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelErrors {
    pub model: String,
    pub total: usize,
    pub accepted: f64,
    pub categories: BTreeMap<ErrorCategory, f64>,
}

impl ModelErrors {
    pub fn percent(&self, c: ErrorCategory) -> f64 {
        self.categories.get(&c).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub models: Vec<ModelErrors>,
}

/// Per-model percentages of traces by final-outcome category.
pub fn error_distribution(traces: &[SolveTrace]) -> Result<ErrorDistribution, BenchError> {
    if traces.is_empty() {
        return Err(BenchError::NoTraces);
    }
    let mut by_model: BTreeMap<&str, Vec<&SolveTrace>> = BTreeMap::new();
    for t in traces {
        by_model
            .entry(t.config.model_name.as_str())
            .or_default()
            .push(t);
    }
    let models = by_model
        .into_iter()
        .map(|(model, ts)| {
            let n = ts.len() as f64;
            let mut counts: BTreeMap<ErrorCategory, usize> =
                ErrorCategory::ALL.iter().map(|&c| (c, 0)).collect();
            let mut solved = 0;
            for t in &ts {
                match classify(t) {
                    Some(c) => *counts.get_mut(&c).expect("all categories present") += 1,
                    None => solved += 1,
                }
            }
            ModelErrors {
                model: model.to_string(),
                total: ts.len(),
                accepted: 100.0 * solved as f64 / n,
                categories: counts
                    .into_iter()
                    .map(|(c, k)| (c, 100.0 * k as f64 / n))
                    .collect(),
            }
        })
        .collect();
    Ok(ErrorDistribution { models })
}
