//! Problem data model and the on-disk corpus layout.
//!
//! A corpus is a directory with one subdirectory per problem:
//!
//! ```text
//! <root>/<problem_id>/
//!     statement.md
//!     meta.json
//!     editorial.md          (optional)
//!     solution.cpp
//!     tests/unit/NNN.in     tests/unit/NNN.ans
//!     tests/hidden/NNN.in   tests/hidden/NNN.ans
//! ```
//!
//! `meta.json` carries `time_limit_ms`, `memory_limit_mib`, `venue`,
//! `category` (`wf`, `cf` or `regional`), an optional `float_tolerance`, an
//! optional `title`, and `synthesized_tests`, the list of unit test ids that
//! were produced by a generator rather than copied from the statement.
//! Hidden tests are always synthesized.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::judge::{ComparePolicy, Judge, JudgeReport, SandboxError};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("malformed problem `{problem_id}`: {reason}")]
    MalformedProblem { problem_id: String, reason: String },
    #[error("no problem directories found under {0}")]
    EmptyCorpus(PathBuf),
    #[error("no time/memory limits found in statement")]
    LimitsNotFound,
    #[error("split sizes {train}+{test} exceed corpus size {available}")]
    SizeMismatch {
        train: usize,
        test: usize,
        available: usize,
    },
    #[error("problem `{0}` has no unit tests")]
    NoUnitTests(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn malformed(id: &str, reason: impl Into<String>) -> CorpusError {
    CorpusError::MalformedProblem {
        problem_id: id.to_string(),
        reason: reason.into(),
    }
}

/// Per-problem resource bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Limits {
    pub time_limit_ms: u64,
    pub memory_limit_mib: u64,
}

impl Limits {
    pub fn new(time_limit_ms: u64, memory_limit_mib: u64) -> Option<Self> {
        (time_limit_ms > 0 && memory_limit_mib > 0).then_some(Self {
            time_limit_ms,
            memory_limit_mib,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOrigin {
    Sample,
    Synthesized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Unit,
    Hidden,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub test_id: String,
    #[serde(with = "bytes_as_text")]
    pub input: Vec<u8>,
    #[serde(with = "bytes_as_text")]
    pub expected_output: Vec<u8>,
    pub origin: TestOrigin,
    pub visibility: Visibility,
}

/// Test payloads are raw bytes but nearly always text; serialize them as
/// strings (lossy for invalid UTF-8).
pub(crate) mod bytes_as_text {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&String::from_utf8_lossy(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        Ok(String::deserialize(d)?.into_bytes())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "wf")]
    WorldFinal,
    #[serde(rename = "cf")]
    ContinentalFinal,
    #[serde(rename = "regional")]
    Regional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub problem_id: String,
    pub title: String,
    pub statement: String,
    pub limits: Limits,
    pub unit_tests: Vec<TestCase>,
    pub hidden_tests: Vec<TestCase>,
    pub editorial: String,
    pub reference_code: String,
    pub venue: String,
    pub category: Category,
    pub float_tolerance: Option<f64>,
}

impl Problem {
    pub fn compare_policy(&self) -> ComparePolicy {
        match self.float_tolerance {
            Some(tol) => ComparePolicy::FloatTolerance(tol),
            None => ComparePolicy::Exact,
        }
    }

    /// Sample tests only; what a human sees in the statement.
    pub fn samples(&self) -> impl Iterator<Item = &TestCase> {
        self.unit_tests
            .iter()
            .filter(|t| t.origin == TestOrigin::Sample)
    }

    /// Checks every structural invariant of a problem.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let id = &self.problem_id;
        if id.is_empty() {
            return Err(malformed(id, "empty problem id"));
        }
        if self.limits.time_limit_ms == 0 || self.limits.memory_limit_mib == 0 {
            return Err(malformed(id, "limits must be positive"));
        }
        if editorial_has_code(&self.editorial) {
            return Err(malformed(id, "editorial contains a fenced code block"));
        }
        let mut ids = HashSet::new();
        for t in self.unit_tests.iter().chain(&self.hidden_tests) {
            if t.input.is_empty() {
                return Err(malformed(id, format!("test {} has empty input", t.test_id)));
            }
            if !ids.insert(t.test_id.as_str()) {
                return Err(malformed(id, format!("duplicate test id {}", t.test_id)));
            }
            if t.origin == TestOrigin::Sample && t.visibility != Visibility::Unit {
                return Err(malformed(
                    id,
                    format!("sample test {} is not unit", t.test_id),
                ));
            }
        }
        if self
            .unit_tests
            .iter()
            .any(|t| t.visibility != Visibility::Unit)
            || self
                .hidden_tests
                .iter()
                .any(|t| t.visibility != Visibility::Hidden)
        {
            return Err(malformed(
                id,
                "test visibility disagrees with its partition",
            ));
        }
        let unit_inputs: HashSet<&[u8]> =
            self.unit_tests.iter().map(|t| t.input.as_slice()).collect();
        if let Some(t) = self
            .hidden_tests
            .iter()
            .find(|t| unit_inputs.contains(t.input.as_slice()))
        {
            return Err(malformed(
                id,
                format!(
                    "partition overlap: hidden test {} duplicates a unit input",
                    t.test_id
                ),
            ));
        }
        Ok(())
    }
}

fn editorial_has_code(editorial: &str) -> bool {
    editorial
        .lines()
        .any(|l| l.trim_start().starts_with("```") || l.trim_start().starts_with("~~~"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub problems: Vec<Problem>,
    pub root_path: PathBuf,
}

impl Corpus {
    pub fn get(&self, problem_id: &str) -> Option<&Problem> {
        self.problems.iter().find(|p| p.problem_id == problem_id)
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    /// Content hash over every problem field that affects evaluation.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.problems {
            let bytes = serde_json::to_vec(p).expect("problem serializes");
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProblemMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_limit_mib: Option<u64>,
    pub venue: String,
    pub category: Option<Category>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub float_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synthesized_tests: Vec<String>,
}

fn limit_patterns() -> &'static (Regex, Regex) {
    static RE: OnceLock<(Regex, Regex)> = OnceLock::new();
    RE.get_or_init(|| {
        (
            Regex::new(r"(?i)time\s+limit\s*(?:per\s+test)?\s*[:=]?\s*([0-9]+(?:\.[0-9]+)?)\s*(?:seconds?|secs?|s)\b")
                .unwrap(),
            Regex::new(r"(?i)memory\s+limit\s*(?:per\s+test)?\s*[:=]?\s*([0-9]+)\s*(?:megabytes?|mib|mb)\b")
                .unwrap(),
        )
    })
}

/// Pulls time and memory limits out of statement text.
pub fn extract_limits(statement: &str) -> Result<Limits, CorpusError> {
    let (time_re, mem_re) = limit_patterns();
    let secs: f64 = time_re
        .captures(statement)
        .and_then(|c| c[1].parse().ok())
        .ok_or(CorpusError::LimitsNotFound)?;
    let mib: u64 = mem_re
        .captures(statement)
        .and_then(|c| c[1].parse().ok())
        .ok_or(CorpusError::LimitsNotFound)?;
    Limits::new((secs * 1000.0).round() as u64, mib).ok_or(CorpusError::LimitsNotFound)
}

/// Metadata limits win over statement extraction; a partial metadata entry
/// fills only the field it names.
pub fn resolve_limits(statement: &str, meta: &ProblemMeta) -> Result<Limits, CorpusError> {
    if let (Some(t), Some(m)) = (meta.time_limit_ms, meta.memory_limit_mib) {
        return Limits::new(t, m).ok_or(CorpusError::LimitsNotFound);
    }
    let extracted = extract_limits(statement)?;
    Limits::new(
        meta.time_limit_ms.unwrap_or(extracted.time_limit_ms),
        meta.memory_limit_mib.unwrap_or(extracted.memory_limit_mib),
    )
    .ok_or(CorpusError::LimitsNotFound)
}

fn read_text(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CorpusError> {
    fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_tests(
    dir: &Path,
    problem_id: &str,
    visibility: Visibility,
    synthesized: &BTreeSet<String>,
) -> Result<Vec<TestCase>, CorpusError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let prefix = match visibility {
        Visibility::Unit => "unit",
        Visibility::Hidden => "hidden",
    };
    let mut stems = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })? {
        let path = entry
            .map_err(|source| CorpusError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .path();
        if path.extension().is_some_and(|e| e == "in") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.insert(stem.to_string());
            }
        }
    }
    stems
        .into_iter()
        .map(|stem| {
            let ans = dir.join(format!("{stem}.ans"));
            if !ans.is_file() {
                return Err(malformed(problem_id, format!("missing {}", ans.display())));
            }
            let test_id = format!("{prefix}/{stem}");
            let origin = if visibility == Visibility::Hidden || synthesized.contains(&test_id) {
                TestOrigin::Synthesized
            } else {
                TestOrigin::Sample
            };
            Ok(TestCase {
                input: read_bytes(&dir.join(format!("{stem}.in")))?,
                expected_output: read_bytes(&ans)?,
                test_id,
                origin,
                visibility,
            })
        })
        .collect()
}

fn first_heading(statement: &str) -> Option<String> {
    statement
        .lines()
        .find_map(|l| l.strip_prefix("# "))
        .map(|t| t.trim().to_string())
}

/// Loads one problem directory.
pub fn load_problem(dir: &Path) -> Result<Problem, CorpusError> {
    let problem_id = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or_default()
        .to_string();
    let meta_text = read_text(&dir.join("meta.json"))?;
    let meta: ProblemMeta = serde_json::from_str(&meta_text)
        .map_err(|e| malformed(&problem_id, format!("meta.json: {e}")))?;
    let statement = read_text(&dir.join("statement.md"))?;
    if statement.trim().is_empty() {
        return Err(malformed(&problem_id, "empty statement"));
    }
    let limits = resolve_limits(&statement, &meta)
        .map_err(|_| malformed(&problem_id, "no limits in meta.json or statement"))?;
    let editorial_path = dir.join("editorial.md");
    let editorial = if editorial_path.is_file() {
        read_text(&editorial_path)?
    } else {
        log::warn!("problem {problem_id}: no editorial.md, using empty editorial");
        String::new()
    };
    let reference_code = read_text(&dir.join("solution.cpp"))?;
    let category = meta
        .category
        .ok_or_else(|| malformed(&problem_id, "meta.json: missing category"))?;
    let synthesized: BTreeSet<String> = meta.synthesized_tests.iter().cloned().collect();
    let unit_tests = load_tests(
        &dir.join("tests/unit"),
        &problem_id,
        Visibility::Unit,
        &synthesized,
    )?;
    let hidden_tests = load_tests(
        &dir.join("tests/hidden"),
        &problem_id,
        Visibility::Hidden,
        &synthesized,
    )?;
    let problem = Problem {
        title: meta
            .title
            .clone()
            .or_else(|| first_heading(&statement))
            .unwrap_or_else(|| problem_id.clone()),
        problem_id,
        statement,
        limits,
        unit_tests,
        hidden_tests,
        editorial,
        reference_code,
        venue: meta.venue,
        category,
        float_tolerance: meta.float_tolerance,
    };
    problem.validate()?;
    Ok(problem)
}

/// Loads and validates every problem directory under `root`, in name order.
pub fn load_corpus(root: &Path) -> Result<Corpus, CorpusError> {
    let entries = fs::read_dir(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("meta.json").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    let mut seen = HashSet::new();
    let mut problems = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let problem = load_problem(&dir)?;
        if !seen.insert(problem.problem_id.clone()) {
            return Err(malformed(&problem.problem_id, "duplicate problem id"));
        }
        problems.push(problem);
    }
    Ok(Corpus {
        problems,
        root_path: root.to_path_buf(),
    })
}

/// Builds a corpus from in-memory problems, checking the same invariants as
/// [`load_corpus`].
pub fn corpus_from_problems(
    problems: Vec<Problem>,
    root_path: impl Into<PathBuf>,
) -> Result<Corpus, CorpusError> {
    let root_path = root_path.into();
    if problems.is_empty() {
        return Err(CorpusError::EmptyCorpus(root_path));
    }
    let mut seen = HashSet::new();
    for p in &problems {
        p.validate()?;
        if !seen.insert(p.problem_id.as_str()) {
            return Err(malformed(&p.problem_id, "duplicate problem id"));
        }
    }
    Ok(Corpus {
        problems,
        root_path,
    })
}

/// Writes a problem back into the directory layout under `root`.
pub fn write_problem(root: &Path, problem: &Problem) -> Result<PathBuf, CorpusError> {
    let dir = root.join(&problem.problem_id);
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    for sub in ["tests/unit", "tests/hidden"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(io(&d))?;
    }
    let meta = ProblemMeta {
        title: Some(problem.title.clone()),
        time_limit_ms: Some(problem.limits.time_limit_ms),
        memory_limit_mib: Some(problem.limits.memory_limit_mib),
        venue: problem.venue.clone(),
        category: Some(problem.category),
        float_tolerance: problem.float_tolerance,
        synthesized_tests: problem
            .unit_tests
            .iter()
            .filter(|t| t.origin == TestOrigin::Synthesized)
            .map(|t| t.test_id.clone())
            .collect(),
    };
    let meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n";
    let files: [(&str, &[u8]); 4] = [
        ("meta.json", meta_json.as_bytes()),
        ("statement.md", problem.statement.as_bytes()),
        ("editorial.md", problem.editorial.as_bytes()),
        ("solution.cpp", problem.reference_code.as_bytes()),
    ];
    for (name, contents) in files {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
    }
    for t in problem.unit_tests.iter().chain(&problem.hidden_tests) {
        let base = dir.join("tests").join(&t.test_id);
        let input = base.with_extension("in");
        let ans = base.with_extension("ans");
        fs::write(&input, &t.input).map_err(io(&input))?;
        fs::write(&ans, &t.expected_output).map_err(io(&ans))?;
    }
    Ok(dir)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestVerdict {
    pub test_id: String,
    pub visibility: Visibility,
    pub verdict: crate::judge::Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub problem_id: String,
    pub per_test: Vec<TestVerdict>,
    pub pass: bool,
    /// Compiler diagnostics when the reference failed to build.
    pub compile_error: Option<String>,
}

/// Runs the reference solution against every unit and hidden test.
pub fn validate_reference(
    problem: &Problem,
    judge: &Judge,
) -> Result<ValidationReport, SandboxError> {
    let tests: Vec<TestCase> = problem
        .unit_tests
        .iter()
        .chain(&problem.hidden_tests)
        .cloned()
        .collect();
    let report: JudgeReport = judge.judge_solution(
        &problem.reference_code,
        &tests,
        problem.limits,
        problem.compare_policy(),
    )?;
    let per_test: Vec<TestVerdict> = report
        .per_test
        .iter()
        .zip(&tests)
        .map(|(r, t)| TestVerdict {
            test_id: r.test_id.clone(),
            visibility: t.visibility,
            verdict: r.verdict(),
        })
        .collect();
    Ok(ValidationReport {
        problem_id: problem.problem_id.clone(),
        pass: !per_test.is_empty() && per_test.iter().all(|t| t.verdict.is_accepted()),
        per_test,
        compile_error: report.compile_diagnostics,
    })
}

/// Deterministic disjoint train/test split.
pub fn make_split(
    corpus: &Corpus,
    train_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    if train_size + test_size > corpus.len() {
        return Err(CorpusError::SizeMismatch {
            train: train_size,
            test: test_size,
            available: corpus.len(),
        });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| {
        let mut idx = idx.to_vec();
        idx.sort_unstable();
        Corpus {
            problems: idx.iter().map(|&i| corpus.problems[i].clone()).collect(),
            root_path: corpus.root_path.clone(),
        }
    };
    Ok((
        pick(&order[..train_size]),
        pick(&order[train_size..train_size + test_size]),
    ))
}

/// The tests the solving loop may see: the whole unit partition.
pub fn select_judge_tests(problem: &Problem) -> Result<Vec<TestCase>, CorpusError> {
    if problem.unit_tests.is_empty() {
        return Err(CorpusError::NoUnitTests(problem.problem_id.clone()));
    }
    let hidden: HashSet<&[u8]> = problem
        .hidden_tests
        .iter()
        .map(|t| t.input.as_slice())
        .collect();
    Ok(problem
        .unit_tests
        .iter()
        .filter(|t| !hidden.contains(t.input.as_slice()))
        .cloned()
        .collect())
}

/// Counts problems per category, for corpus summaries.
pub fn category_counts(corpus: &Corpus) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for p in &corpus.problems {
        let key = match p.category {
            Category::WorldFinal => "wf",
            Category::ContinentalFinal => "cf",
            Category::Regional => "regional",
        };
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn tc(id: &str, input: &str, out: &str, origin: TestOrigin, vis: Visibility) -> TestCase {
        TestCase {
            test_id: id.into(),
            input: input.as_bytes().to_vec(),
            expected_output: out.as_bytes().to_vec(),
            origin,
            visibility: vis,
        }
    }

    pub fn toy_problem(id: &str) -> Problem {
        Problem {
            problem_id: id.into(),
            title: format!("Toy {id}"),
            statement: format!("# Toy {id}\nRead a and b, print a+b.\nTime limit: 1 second\nMemory limit: 64 megabytes\n"),
            limits: Limits::new(1000, 64).unwrap(),
            unit_tests: vec![
                tc("unit/001", "1 2\n", "3\n", TestOrigin::Sample, Visibility::Unit),
                tc("unit/002", "5 7\n", "12\n", TestOrigin::Synthesized, Visibility::Unit),
            ],
            hidden_tests: vec![tc("hidden/001", "100 200\n", "300\n", TestOrigin::Synthesized, Visibility::Hidden)],
            editorial: "Add the numbers.".into(),
            reference_code: "#include <cstdio>\nint main(){long long a,b;scanf(\"%lld %lld\",&a,&b);printf(\"%lld\\n\",a+b);}\n".into(),
            venue: "Toy Regional".into(),
            category: Category::Regional,
            float_tolerance: None,
        }
    }

    #[test]
    fn extracts_integer_and_decimal_limits() {
        let l = extract_limits("Time limit: 2 seconds\n...\nMemory limit: 256 megabytes").unwrap();
        assert_eq!(l, Limits::new(2000, 256).unwrap());
        let l = extract_limits("TIME LIMIT: 1.5 seconds ... memory limit: 64 megabytes").unwrap();
        assert_eq!(l, Limits::new(1500, 64).unwrap());
    }

    #[test]
    fn missing_limits_is_an_error() {
        assert!(matches!(
            extract_limits("Print the sum of two numbers."),
            Err(CorpusError::LimitsNotFound)
        ));
        assert!(matches!(
            extract_limits("Time limit: 2 seconds"),
            Err(CorpusError::LimitsNotFound)
        ));
    }

    #[test]
    fn metadata_overrides_statement() {
        let meta = ProblemMeta {
            time_limit_ms: Some(3000),
            memory_limit_mib: Some(512),
            ..Default::default()
        };
        let l = resolve_limits("Time limit: 1 second\nMemory limit: 64 megabytes", &meta).unwrap();
        assert_eq!(l, Limits::new(3000, 512).unwrap());
        let l = resolve_limits("no limits here", &meta).unwrap();
        assert_eq!(l.time_limit_ms, 3000);
        let partial = ProblemMeta {
            memory_limit_mib: Some(128),
            ..Default::default()
        };
        let l =
            resolve_limits("Time limit: 1 second\nMemory limit: 64 megabytes", &partial).unwrap();
        assert_eq!(l, Limits::new(1000, 128).unwrap());
    }

    #[test]
    fn partition_overlap_rejected() {
        let mut p = toy_problem("a");
        p.validate().unwrap();
        p.hidden_tests[0].input = p.unit_tests[1].input.clone();
        let err = p.validate().unwrap_err();
        assert!(err.to_string().contains("partition overlap"), "{err}");
    }

    #[test]
    fn editorial_code_rejected() {
        let mut p = toy_problem("a");
        p.editorial = "Use this:\n```cpp\nint main(){}\n```\n".into();
        assert!(p.validate().is_err());
    }

    #[test]
    fn hidden_sample_rejected() {
        let mut p = toy_problem("a");
        p.hidden_tests[0].origin = TestOrigin::Sample;
        assert!(p.validate().is_err());
    }

    #[test]
    fn judge_tests_are_the_unit_partition() {
        let mut p = toy_problem("a");
        p.unit_tests.push(tc(
            "unit/003",
            "9 9\n",
            "18\n",
            TestOrigin::Synthesized,
            Visibility::Unit,
        ));
        for i in 0..10 {
            p.hidden_tests.push(tc(
                &format!("hidden/{:03}", i + 2),
                &format!("{i} 1000\n"),
                "",
                TestOrigin::Synthesized,
                Visibility::Hidden,
            ));
        }
        let sel = select_judge_tests(&p).unwrap();
        assert_eq!(sel.len(), 3);
        assert!(sel.iter().all(|t| t.visibility == Visibility::Unit));

        p.unit_tests.clear();
        assert!(matches!(
            select_judge_tests(&p),
            Err(CorpusError::NoUnitTests(_))
        ));
    }

    fn corpus_of(n: usize) -> Corpus {
        corpus_from_problems(
            (0..n).map(|i| toy_problem(&format!("p{i:03}"))).collect(),
            "/tmp",
        )
        .unwrap()
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let c = corpus_of(254);
        let (train, test) = make_split(&c, 200, 54, 7).unwrap();
        assert_eq!((train.len(), test.len()), (200, 54));
        let a: HashSet<_> = train.problems.iter().map(|p| &p.problem_id).collect();
        assert!(test.problems.iter().all(|p| !a.contains(&p.problem_id)));
        let (train2, test2) = make_split(&c, 200, 54, 7).unwrap();
        let ids = |c: &Corpus| {
            c.problems
                .iter()
                .map(|p| p.problem_id.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(ids(&train), ids(&train2));
        assert_eq!(ids(&test), ids(&test2));

        let small = corpus_of(5);
        let (all, none) = make_split(&small, 5, 0, 3).unwrap();
        assert_eq!((all.len(), none.len()), (5, 0));
        assert!(matches!(
            make_split(&small, 4, 2, 0),
            Err(CorpusError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = corpus_from_problems(vec![toy_problem("x"), toy_problem("x")], "/tmp");
        assert!(matches!(r, Err(CorpusError::MalformedProblem { .. })));
    }

    proptest::proptest! {
        #[test]
        fn split_invariants(n in 1usize..40, train in 0usize..40, test in 0usize..40, seed: u64) {
            let c = corpus_of(n);
            match make_split(&c, train, test, seed) {
                Ok((a, b)) => {
                    proptest::prop_assert!(train + test <= n);
                    proptest::prop_assert_eq!(a.len() + b.len(), train + test);
                    let ids: HashSet<_> = a.problems.iter().map(|p| p.problem_id.clone()).collect();
                    proptest::prop_assert!(b.problems.iter().all(|p| !ids.contains(&p.problem_id)));
                }
                Err(_) => proptest::prop_assert!(train + test > n),
            }
        }

        #[test]
        fn extract_limits_is_pure(secs in 1u32..20, tenth in 0u32..10, mib in 1u64..4096) {
            let text = format!("Time limit: {secs}.{tenth} seconds\nMemory limit: {mib} megabytes");
            let a = extract_limits(&text).unwrap();
            proptest::prop_assert_eq!(a, extract_limits(&text).unwrap());
            proptest::prop_assert_eq!(a.time_limit_ms, u64::from(secs) * 1000 + u64::from(tenth) * 100);
            proptest::prop_assert_eq!(a.memory_limit_mib, mib);
        }
    }
}
