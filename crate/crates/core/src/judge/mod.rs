//! Compiles candidate programs, runs them against tests in a resource-limited
//! sandbox, and classifies the outcome.

mod compare;
mod pass_at_k;
mod sandbox;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use compare::{compare_output, ComparePolicy};
pub use pass_at_k::{mean_pass_at_k, pass_at_k, DomainError};
pub use sandbox::{
    compile_source, network_isolation_available, run_with_args, run_with_limits, CompileError,
    CompiledArtifact, SandboxError, SandboxOptions, ToolchainProfile, DEFAULT_OUTPUT_CAP,
};

use crate::corpus::{bytes_as_text, Limits, TestCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Verdict {
    Accepted,
    WrongAnswer,
    TimeLimit,
    MemoryLimit,
    RuntimeError,
    CompileError,
    Other,
}

impl Verdict {
    pub fn is_accepted(self) -> bool {
        self == Verdict::Accepted
    }

    pub fn short(self) -> &'static str {
        match self {
            Verdict::Accepted => "AC",
            Verdict::WrongAnswer => "WA",
            Verdict::TimeLimit => "TLE",
            Verdict::MemoryLimit => "MLE",
            Verdict::RuntimeError => "RE",
            Verdict::CompileError => "CE",
            Verdict::Other => "OTHER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Code(i32),
    Signal(String),
    /// The program never ran (compile failure).
    NotRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub verdict: Verdict,
    #[serde(with = "bytes_as_text")]
    pub stdout: Vec<u8>,
    #[serde(with = "bytes_as_text")]
    pub stderr: Vec<u8>,
    pub wall_time_ms: u64,
    pub peak_memory_mib: f64,
    pub exit: ExitStatus,
}

impl ExecutionResult {
    fn not_run(verdict: Verdict) -> Self {
        Self {
            verdict,
            stdout: Vec::new(),
            stderr: Vec::new(),
            wall_time_ms: 0,
            peak_memory_mib: 0.0,
            exit: ExitStatus::NotRun,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_id: String,
    pub result: ExecutionResult,
    pub output_match: bool,
}

impl TestResult {
    /// Final verdict for the test, after output comparison.
    pub fn verdict(&self) -> Verdict {
        self.result.verdict
    }

    pub fn passed(&self) -> bool {
        self.result.verdict.is_accepted() && self.output_match
    }
}

/// Outcome of judging one source against a test list. This is the JSON
/// record other modules consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeReport {
    pub problem_id: String,
    pub per_test: Vec<TestResult>,
    pub passed: bool,
    pub first_failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compile_diagnostics: Option<String>,
}

impl JudgeReport {
    pub fn tests_passed(&self) -> usize {
        self.per_test.iter().filter(|t| t.passed()).count()
    }

    pub fn tests_total(&self) -> usize {
        self.per_test.len()
    }

    /// Verdict of the first failing test, if any.
    pub fn first_failing_verdict(&self) -> Option<Verdict> {
        self.per_test
            .iter()
            .find(|t| !t.passed())
            .map(|t| t.verdict())
    }

    /// A report whose timing and memory measurements are zeroed, for
    /// comparing runs that should be identical.
    pub fn without_measurements(&self) -> Self {
        let mut r = self.clone();
        for t in &mut r.per_test {
            t.result.wall_time_ms = 0;
            t.result.peak_memory_mib = 0.0;
        }
        r
    }

    fn assemble(
        problem_id: &str,
        per_test: Vec<TestResult>,
        compile_diagnostics: Option<String>,
    ) -> Self {
        let first_failure = per_test
            .iter()
            .find(|t| !t.passed())
            .map(|t| t.test_id.clone());
        Self {
            problem_id: problem_id.to_string(),
            passed: !per_test.is_empty() && first_failure.is_none(),
            first_failure,
            per_test,
            compile_diagnostics,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("no tests to judge against")]
    NoTests,
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

type CacheEntry = Result<CompiledArtifact, String>;

/// Judging service: one toolchain profile, a bounded worker pool, and a
/// compile cache keyed by source hash. Safe to share between threads.
#[derive(Debug)]
pub struct Judge {
    profile: ToolchainProfile,
    workers: usize,
    sandbox: SandboxOptions,
    cache: Mutex<HashMap<[u8; 32], CacheEntry>>,
}

impl Default for Judge {
    fn default() -> Self {
        Self::new(ToolchainProfile::cpp17())
    }
}

impl Judge {
    pub fn new(profile: ToolchainProfile) -> Self {
        Self {
            profile,
            workers: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            sandbox: SandboxOptions::default(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_sandbox(mut self, sandbox: SandboxOptions) -> Self {
        self.sandbox = sandbox;
        self
    }

    pub fn profile(&self) -> &ToolchainProfile {
        &self.profile
    }

    pub fn sandbox(&self) -> SandboxOptions {
        self.sandbox
    }

    /// Compiles through the cache. `Ok(Err(diag))` is a candidate compile
    /// failure; `Err` is a harness fault.
    pub fn compile(&self, source: &str) -> Result<CacheEntry, SandboxError> {
        let key = self.profile.source_key(source);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let entry = match compile_source(source, &self.profile) {
            Ok(a) => Ok(a),
            Err(CompileError::Diagnostics { diagnostics }) => Err(diagnostics),
            Err(CompileError::Sandbox(e)) => return Err(e),
        };
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, entry.clone());
        Ok(entry)
    }

    pub fn run(
        &self,
        artifact: &CompiledArtifact,
        input: &[u8],
        limits: Limits,
    ) -> Result<ExecutionResult, SandboxError> {
        run_with_limits(artifact, input, limits, self.sandbox)
    }

    /// Compiles once and runs every test, fanning out over the worker pool.
    pub fn judge_solution(
        &self,
        source: &str,
        tests: &[TestCase],
        limits: Limits,
        policy: ComparePolicy,
    ) -> Result<JudgeReport, SandboxError> {
        self.judge_for("", source, tests, limits, policy)
    }

    pub fn judge_for(
        &self,
        problem_id: &str,
        source: &str,
        tests: &[TestCase],
        limits: Limits,
        policy: ComparePolicy,
    ) -> Result<JudgeReport, SandboxError> {
        let artifact = match self.compile(source)? {
            Ok(a) => a,
            Err(diag) => {
                let per_test = tests
                    .iter()
                    .map(|t| TestResult {
                        test_id: t.test_id.clone(),
                        result: ExecutionResult::not_run(Verdict::CompileError),
                        output_match: false,
                    })
                    .collect();
                return Ok(JudgeReport::assemble(problem_id, per_test, Some(diag)));
            }
        };
        let per_test = self.run_all(&artifact, tests, limits, policy)?;
        Ok(JudgeReport::assemble(problem_id, per_test, None))
    }

    fn run_one(
        &self,
        artifact: &CompiledArtifact,
        test: &TestCase,
        limits: Limits,
        policy: ComparePolicy,
    ) -> Result<TestResult, SandboxError> {
        let mut result = self.run(artifact, &test.input, limits)?;
        let output_match = result.verdict.is_accepted()
            && compare_output(&result.stdout, &test.expected_output, policy);
        if result.verdict.is_accepted() && !output_match {
            result.verdict = Verdict::WrongAnswer;
        }
        Ok(TestResult {
            test_id: test.test_id.clone(),
            result,
            output_match,
        })
    }

    fn run_all(
        &self,
        artifact: &CompiledArtifact,
        tests: &[TestCase],
        limits: Limits,
        policy: ComparePolicy,
    ) -> Result<Vec<TestResult>, SandboxError> {
        self.par_map(tests, |t| self.run_one(artifact, t, limits, policy))
            .into_iter()
            .collect()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Applies `f` to every item on the worker pool, keeping input order.
    pub fn par_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
        let width = self.workers.min(items.len()).max(1);
        if width == 1 {
            return items.iter().map(f).collect();
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..width {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(item) = items.get(i) else { break };
                    let r = f(item);
                    *slots[i].lock().expect("slot") = Some(r);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| m.into_inner().expect("slot").expect("every item ran"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{TestOrigin, Visibility};

    fn test(id: &str, input: &str, out: &str) -> TestCase {
        TestCase {
            test_id: id.into(),
            input: input.into(),
            expected_output: out.into(),
            origin: TestOrigin::Sample,
            visibility: Visibility::Unit,
        }
    }

    const ADD: &str = "#include <cstdio>\nint main(){long long a,b;if(scanf(\"%lld %lld\",&a,&b)!=2)return 1;printf(\"%lld\\n\",a+b);}\n";
    const ECHO: &str =
        "#include <cstdio>\nint main(){int c;while((c=getchar())!=EOF)putchar(c);}\n";

    fn limits() -> Limits {
        Limits::new(1000, 64).unwrap()
    }

    #[test]
    fn accepted_wrong_and_compile_error() {
        let judge = Judge::default().with_workers(2);
        let tests = vec![
            test("a", "1 2\n", "3\n"),
            test("b", "5 5\n", "10\n"),
            test("c", "-1 1\n", "0\n"),
        ];
        let ok = judge
            .judge_solution(ADD, &tests, limits(), ComparePolicy::Exact)
            .unwrap();
        assert!(ok.passed, "{ok:?}");
        assert!(ok.first_failure.is_none());
        assert_eq!(ok.tests_passed(), 3);

        let wa = judge
            .judge_solution(ECHO, &tests, limits(), ComparePolicy::Exact)
            .unwrap();
        assert!(!wa.passed);
        assert_eq!(wa.per_test[0].verdict(), Verdict::WrongAnswer);
        assert_eq!(wa.first_failure.as_deref(), Some("a"));

        let four: Vec<_> = (0..4)
            .map(|i| test(&format!("t{i}"), "1 1\n", "2\n"))
            .collect();
        let ce = judge
            .judge_solution(
                "int main() { return 0 }",
                &four,
                limits(),
                ComparePolicy::Exact,
            )
            .unwrap();
        assert!(!ce.passed);
        assert_eq!(ce.per_test.len(), 4);
        assert!(ce
            .per_test
            .iter()
            .all(|t| t.verdict() == Verdict::CompileError));
        assert!(!ce.compile_diagnostics.unwrap().is_empty());
    }

    #[test]
    fn empty_source_is_compile_error() {
        assert!(matches!(
            compile_source("  \n", &ToolchainProfile::cpp17()),
            Err(CompileError::Diagnostics { .. })
        ));
    }

    #[test]
    fn missing_toolchain_is_reported() {
        let profile = ToolchainProfile {
            name: "nope".into(),
            compile: "definitely-not-a-compiler-xyz {src} -o {out}".into(),
            ..ToolchainProfile::cpp17()
        };
        assert!(matches!(
            compile_source("int main(){}", &profile),
            Err(CompileError::Sandbox(SandboxError::ToolchainMissing(_)))
        ));
    }

    #[test]
    fn report_roundtrips_through_json() {
        let judge = Judge::default();
        let r = judge
            .judge_solution(
                ADD,
                &[test("a", "1 2\n", "3\n")],
                limits(),
                ComparePolicy::Exact,
            )
            .unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: JudgeReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn output_cap_yields_other() {
        let judge = Judge::default().with_sandbox(SandboxOptions {
            output_cap: 1024,
            ..SandboxOptions::default()
        });
        let spam =
            "#include <cstdio>\nint main(){for(int i=0;i<100000;i++)puts(\"xxxxxxxxxxxxxxxx\");}\n";
        let r = judge
            .judge_solution(
                spam,
                &[test("a", "x\n", "y\n")],
                limits(),
                ComparePolicy::Exact,
            )
            .unwrap();
        assert_eq!(r.per_test[0].verdict(), Verdict::Other);
    }
}
