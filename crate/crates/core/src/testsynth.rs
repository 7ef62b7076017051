//! Model-written test generators: synthesis, execution against the
//! reference solution, and partitioning into unit and hidden tests.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::agent::{
    extract_code_block, render_prompt, Bindings, ClientError, Purpose, Session, TemplateName,
};
use crate::corpus::{Limits, Problem, TestCase, TestOrigin, Visibility};
use crate::judge::{run_with_args, CompiledArtifact, Judge, SandboxError, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    Random,
    Corner,
}

impl GeneratorKind {
    pub fn template(self) -> TemplateName {
        match self {
            Self::Random => TemplateName::RandomSynth,
            Self::Corner => TemplateName::CornerSynth,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorArtifact {
    pub kind: GeneratorKind,
    pub source: String,
    pub compiled: CompiledArtifact,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthFailure {
    #[error("no code block in the response")]
    NoCodeBlock,
    #[error("generator does not compile: {0}")]
    CompileError(String),
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("problem {0} has no reference solution")]
    MissingReference(String),
    #[error("{kind:?} generator synthesis failed after retry: {failure}")]
    SynthesisFailed {
        kind: GeneratorKind,
        failure: SynthFailure,
    },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("generator misbehaved on {problem_id}: {discarded} of {runs} runs discarded")]
    GeneratorMisbehaved {
        problem_id: String,
        discarded: usize,
        runs: usize,
    },
    #[error("reference solution of {problem_id} does not compile: {diagnostics}")]
    ReferenceCompile {
        problem_id: String,
        diagnostics: String,
    },
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

/// Generator execution time is capped at this multiple of the problem's
/// time limit.
pub const GENERATOR_TIME_FACTOR: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub random: usize,
    pub corner: usize,
    pub unit_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            random: 20,
            corner: 10,
            unit_fraction: 0.3,
        }
    }
}

/// The synthesis prompt: the kind's template followed by the problem and
/// its reference solution.
pub fn synth_prompt(problem: &Problem, kind: GeneratorKind) -> String {
    let mut prompt = render_prompt(kind.template(), &Bindings::new())
        .expect("synthesis templates take no bindings");
    let binding = render_prompt(
        TemplateName::SynthBinding,
        &Bindings::from([
            ("description", problem.statement.trim_end()),
            ("reference_code", problem.reference_code.trim_end()),
        ]),
    )
    .expect("binding block bindings complete");
    prompt.push_str(&binding);
    prompt
}

fn retry_note(failure: &SynthFailure) -> String {
    match failure {
        SynthFailure::NoCodeBlock => {
            "\n\nYour previous reply did not contain a fenced C++ code block. Reply again with the complete generator in one code block.\n"
                .to_string()
        }
        SynthFailure::CompileError(diag) => format!(
            "\n\nYour previous generator failed to compile with these diagnostics:\n{diag}\nReply again with a corrected, complete generator in one code block.\n"
        ),
    }
}

/// Asks the model for a generator program and compiles it, retrying once
/// with the failure appended to the prompt.
pub fn synth_generator(
    session: &mut Session<'_>,
    judge: &Judge,
    problem: &Problem,
    kind: GeneratorKind,
) -> Result<GeneratorArtifact, SynthError> {
    if problem.reference_code.trim().is_empty() {
        return Err(SynthError::MissingReference(problem.problem_id.clone()));
    }
    let base = synth_prompt(problem, kind);
    let mut prompt = base.clone();
    let mut failure = SynthFailure::NoCodeBlock;
    for attempt in 0..2 {
        if attempt > 0 {
            log::warn!(
                "{}: {kind:?} generator attempt failed ({failure}); retrying",
                problem.problem_id
            );
            prompt = base.clone() + &retry_note(&failure);
        }
        let response = session.call(Purpose::Synthesis, kind.template(), prompt.clone())?;
        let Ok(source) = extract_code_block(&response) else {
            failure = SynthFailure::NoCodeBlock;
            continue;
        };
        match judge.compile(source)? {
            Ok(compiled) => {
                return Ok(GeneratorArtifact {
                    kind,
                    source: source.to_string(),
                    compiled,
                })
            }
            Err(diag) => failure = SynthFailure::CompileError(diag),
        }
    }
    Err(SynthError::SynthesisFailed { kind, failure })
}

/// Runs the generator `n` times and labels each input with the reference
/// solution's output. Run `k` receives `k` as its only argument. Runs where
/// the generator or the reference fails are discarded; more than half
/// discarded is an error. New tests get provisional ids `new/NNN` and
/// unit visibility until partitioned.
pub fn materialize_tests(
    judge: &Judge,
    generator: &GeneratorArtifact,
    problem: &Problem,
    n: usize,
) -> Result<Vec<TestCase>, SynthError> {
    let reference = judge
        .compile(&problem.reference_code)?
        .map_err(|diagnostics| SynthError::ReferenceCompile {
            problem_id: problem.problem_id.clone(),
            diagnostics,
        })?;
    let gen_limits = Limits {
        time_limit_ms: problem.limits.time_limit_ms * GENERATOR_TIME_FACTOR,
        memory_limit_mib: problem.limits.memory_limit_mib,
    };
    let runs: Vec<usize> = (0..n).collect();
    let outcomes = judge.par_map(&runs, |&k| -> Result<Option<TestCase>, SandboxError> {
        let gen = run_with_args(
            &generator.compiled,
            &[k.to_string()],
            b"",
            gen_limits,
            judge.sandbox(),
        )?;
        if gen.verdict != Verdict::Accepted || gen.stdout.iter().all(u8::is_ascii_whitespace) {
            log::warn!(
                "{}: {:?} generator run {k} discarded ({})",
                problem.problem_id,
                generator.kind,
                gen.verdict.short()
            );
            return Ok(None);
        }
        let reference_run = judge.run(&reference, &gen.stdout, problem.limits)?;
        if reference_run.verdict != Verdict::Accepted {
            log::warn!(
                "{}: reference rejected generator run {k} ({}); discarded",
                problem.problem_id,
                reference_run.verdict.short()
            );
            return Ok(None);
        }
        Ok(Some(TestCase {
            test_id: format!("new/{k:03}"),
            input: gen.stdout,
            expected_output: reference_run.stdout,
            origin: TestOrigin::Synthesized,
            visibility: Visibility::Unit,
        }))
    });
    let tests: Vec<TestCase> = outcomes
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let discarded = n - tests.len();
    if discarded * 2 > n {
        return Err(SynthError::GeneratorMisbehaved {
            problem_id: problem.problem_id.clone(),
            discarded,
            runs: n,
        });
    }
    Ok(tests)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub added_unit: usize,
    pub added_hidden: usize,
    pub duplicates: usize,
}

/// Number of unit tests among `m` new tests: `ceil(unit_fraction * m)`,
/// evaluated with a small epsilon so that 0.3 * 10 gives 3.
pub fn unit_share(m: usize, unit_fraction: f64) -> usize {
    let exact = unit_fraction.clamp(0.0, 1.0) * m as f64;
    ((exact - 1e-9).ceil().max(0.0) as usize).min(m)
}

fn next_free(problem: &Problem, prefix: &str, start: &mut usize) -> String {
    loop {
        *start += 1;
        let id = format!("{prefix}/s{:03}", *start);
        if !problem
            .unit_tests
            .iter()
            .chain(&problem.hidden_tests)
            .any(|t| t.test_id == id)
        {
            return id;
        }
    }
}

/// Drops new tests whose input duplicates any existing or earlier new
/// input, then sends the first `ceil(unit_fraction * m)` of the `m`
/// survivors to the unit partition and the rest to hidden.
///
/// # Panics
/// If `unit_fraction` is outside `[0, 1]`.
pub fn dedupe_and_partition(
    problem: &mut Problem,
    new_tests: Vec<TestCase>,
    unit_fraction: f64,
) -> PartitionSummary {
    assert!(
        (0.0..=1.0).contains(&unit_fraction),
        "unit_fraction must be in [0, 1]"
    );
    let mut seen: HashSet<Vec<u8>> = problem
        .unit_tests
        .iter()
        .chain(&problem.hidden_tests)
        .map(|t| t.input.clone())
        .collect();
    let total = new_tests.len();
    let unique: Vec<TestCase> = new_tests
        .into_iter()
        .filter(|t| seen.insert(t.input.clone()))
        .collect();
    let to_unit = unit_share(unique.len(), unit_fraction);
    let summary = PartitionSummary {
        added_unit: to_unit,
        added_hidden: unique.len() - to_unit,
        duplicates: total - unique.len(),
    };
    let (mut unit_n, mut hidden_n) = (0, 0);
    for (k, mut t) in unique.into_iter().enumerate() {
        t.origin = TestOrigin::Synthesized;
        if k < to_unit {
            t.visibility = Visibility::Unit;
            t.test_id = next_free(problem, "unit", &mut unit_n);
            problem.unit_tests.push(t);
        } else {
            t.visibility = Visibility::Hidden;
            t.test_id = next_free(problem, "hidden", &mut hidden_n);
            problem.hidden_tests.push(t);
        }
    }
    summary
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub problem_id: String,
    pub generated: usize,
    pub partition: PartitionSummary,
}

/// Random and corner synthesis for one problem, partitioned into its suites.
pub fn synthesize_for_problem(
    session: &mut Session<'_>,
    judge: &Judge,
    problem: &mut Problem,
    config: SynthConfig,
) -> Result<SynthSummary, SynthError> {
    let mut new_tests = Vec::new();
    for (kind, n) in [
        (GeneratorKind::Random, config.random),
        (GeneratorKind::Corner, config.corner),
    ] {
        if n == 0 {
            continue;
        }
        let generator = synth_generator(session, judge, problem, kind)?;
        new_tests.extend(materialize_tests(judge, &generator, problem, n)?);
    }
    let generated = new_tests.len();
    let partition = dedupe_and_partition(problem, new_tests, config.unit_fraction);
    Ok(SynthSummary {
        problem_id: problem.problem_id.clone(),
        generated,
        partition,
    })
}
