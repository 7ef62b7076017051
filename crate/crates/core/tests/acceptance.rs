//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits non-zero when any criterion fails.

use std::collections::HashSet;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use cpbench::agent::{
    solve, LmClient, Outcome, PipelineConfig, Retriever, ScriptedClient, Session, Technique,
};
use cpbench::corpus::{corpus_from_problems, load_corpus, Corpus, Limits, TestCase};
use cpbench::experiments::{
    emit_report, error_distribution, run_benchmark, BenchContext, BenchOptions, ErrorCategory,
    EvalMode, ModelRegistry, ReportFormat, ReportOptions,
};
use cpbench::judge::{pass_at_k, ComparePolicy, Judge, Verdict};
use cpbench::retrieval::{
    build_episodic_documents, make_query, retrieve, Composition, EpisodicAblation, Index,
};
use cpbench::testsynth::{synthesize_for_problem, SynthConfig};
use rand::seq::IndexedRandom;
use rand::SeedableRng;

type Check = fn() -> Result<String, String>;

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The five-problem fixture corpus: the sample corpus minus the problem
/// whose demo answer spins until the time limit.
fn fixture_corpus() -> Corpus {
    let full = load_corpus(&workspace().join("corpus")).expect("sample corpus loads");
    let problems = full
        .problems
        .into_iter()
        .filter(|p| p.problem_id != "ribbon-workshop")
        .collect();
    corpus_from_problems(problems, workspace().join("corpus")).unwrap()
}

fn fixture_client(name: &str) -> Arc<ScriptedClient> {
    Arc::new(
        ScriptedClient::from_path(&workspace().join("fixtures").join(name)).expect("fixture loads"),
    )
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn pass_at_k_oracle() -> Result<String, String> {
    let mut checked = 0;
    for n in 0..=8u64 {
        for c in 0..=n {
            for k in 1..=n {
                let mut hit = 0u64;
                let mut total = 0u64;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as u64 != k {
                        continue;
                    }
                    total += 1;
                    if mask & ((1u32 << c) - 1) != 0 {
                        hit += 1;
                    }
                }
                let exact = hit as f64 / total as f64;
                let got = pass_at_k(n, c, k).map_err(|e| e.to_string())?;
                ensure((got - exact).abs() <= 1e-12, || {
                    format!("n={n} c={c} k={k}: {got} vs {exact}")
                })?;
                ensure(total as f64 == binomial(n, k), || {
                    format!("subset count for n={n} k={k}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} (n, c, k) triples"))
}

fn verdict_suite() -> Result<String, String> {
    let judge = Judge::default().with_workers(1);
    let limits = Limits::new(100, 64).unwrap();
    let test = [TestCase {
        test_id: "unit/001".into(),
        input: b"1 2\n".to_vec(),
        expected_output: b"3\n".to_vec(),
        origin: cpbench::corpus::TestOrigin::Sample,
        visibility: cpbench::corpus::Visibility::Unit,
    }];
    let programs = [
        ("sleeper", "#include <unistd.h>\nint main(){ sleep(2); }", Verdict::TimeLimit),
        (
            "over-allocator",
            "#include <cstdio>\n#include <vector>\nint main(){ std::vector<char> v(512u << 20, 1); printf(\"%d\\n\", v[4096]); }",
            Verdict::MemoryLimit,
        ),
        ("aborter", "#include <cstdlib>\nint main(){ abort(); }", Verdict::RuntimeError),
        ("syntax error", "int main( { return 0 }", Verdict::CompileError),
        ("wrong printer", "#include <cstdio>\nint main(){ printf(\"4\\n\"); }", Verdict::WrongAnswer),
    ];
    for (name, source, want) in programs {
        for run in 0..10 {
            let report = judge
                .judge_solution(source, &test, limits, ComparePolicy::Exact)
                .map_err(|e| format!("{name}: {e}"))?;
            let got = report.per_test[0].verdict();
            ensure(got == want, || {
                format!("{name} run {run}: {got:?}, wanted {want:?}")
            })?;
        }
    }
    Ok("5 programs x 10 runs".into())
}

fn leave_one_out() -> Result<String, String> {
    let corpus = load_corpus(&workspace().join("corpus")).map_err(|e| e.to_string())?;
    let index = Index::build(build_episodic_documents(&corpus, EpisodicAblation::Full))
        .map_err(|e| e.to_string())?;
    let all = corpus.len();
    let mut queries = 0;
    for q in &corpus.problems {
        for composition in [
            Composition::DescriptionOnly,
            Composition::DescriptionPlusCode,
            Composition::DescriptionPlusSolutionPlusCode,
        ] {
            let query = make_query(
                &q.statement,
                Some(&q.editorial),
                Some(&q.reference_code),
                composition,
            )
            .map_err(|e| e.to_string())?;
            let with_self = retrieve(&index, &query, all, None);
            ensure(
                with_self
                    .first()
                    .and_then(|d| d.document.source_problem_id.as_deref())
                    == Some(q.problem_id.as_str()),
                || {
                    format!(
                        "{}: own document is not the top hit without exclusion",
                        q.problem_id
                    )
                },
            )?;
            for p in 1..=all {
                let hits = retrieve(&index, &query, p, Some(&q.problem_id));
                ensure(
                    hits.iter().all(|d| {
                        d.document.source_problem_id.as_deref() != Some(q.problem_id.as_str())
                    }),
                    || format!("{} retrieved itself ({composition:?}, p={p})", q.problem_id),
                )?;
                queries += 1;
            }
        }
    }
    Ok(format!("{queries} queries over {all} problems"))
}

fn ablation_direction() -> Result<String, String> {
    let mut rates = Vec::new();
    for ablation in [EpisodicAblation::Full, EpisodicAblation::DescriptionOnly] {
        let mut models = ModelRegistry::new();
        models.insert("ablation", fixture_client("ablation.json"));
        let ctx = BenchContext::new(
            fixture_corpus(),
            Judge::default().with_workers(1),
            models,
            EvalMode::LeaveOneOut,
            ablation,
        )
        .map_err(|e| e.to_string())?;
        let config = PipelineConfig::new("episodic_retrieval".parse().unwrap(), "ablation");
        let run =
            run_benchmark(&ctx, &[config], &BenchOptions::default()).map_err(|e| e.to_string())?;
        let cell = &run.table.cells[0];
        ensure(cell.total == 5, || {
            format!("expected 5 problems, got {}", cell.total)
        })?;
        rates.push(cell.pass1().ok_or("incomplete cell")?);
    }
    ensure(rates == [100.0, 0.0], || {
        format!("full {} vs description-only {}", rates[0], rates[1])
    })?;
    Ok("full 100.0, description-only 0.0".into())
}

fn reflection_contract() -> Result<String, String> {
    let corpus = fixture_corpus();
    let problem = corpus.get("orchard-walk").unwrap();
    let judge = Judge::default().with_workers(1);
    let client = fixture_client("scripted.json");
    for i in 0..=3usize {
        let mut config = PipelineConfig::new("self_reflection".parse().unwrap(), "scripted");
        config.i = i;
        let a = solve(
            problem,
            &config,
            &*client.fresh(),
            &judge,
            Retriever::none(),
        )
        .map_err(|e| e.to_string())?;
        let b = solve(
            problem,
            &config,
            &*client.fresh(),
            &judge,
            Retriever::none(),
        )
        .map_err(|e| e.to_string())?;
        let want = if i == 0 {
            Outcome::Failed
        } else {
            Outcome::Solved
        };
        ensure(a.outcome == want, || format!("i={i}: {:?}", a.outcome))?;
        ensure(a.solution_generations() <= 2 + i, || {
            format!("i={i}: {} generations", a.solution_generations())
        })?;
        ensure(
            a.without_measurements().canonical_json() == b.without_measurements().canonical_json()
                && a.exchanges_jsonl() == b.exchanges_jsonl(),
            || format!("i={i}: replay differs"),
        )?;
    }
    Ok("i=0 failed, i=1..3 solved, replay identical".into())
}

fn bench_context() -> Result<BenchContext, String> {
    let mut models = ModelRegistry::new();
    models.insert("demo", fixture_client("scripted.json"));
    models.insert("ablation", fixture_client("ablation.json"));
    BenchContext::new(
        fixture_corpus(),
        Judge::default().with_workers(1),
        models,
        EvalMode::LeaveOneOut,
        EpisodicAblation::Full,
    )
    .map_err(|e| e.to_string())
}

fn bench_grid() -> Vec<PipelineConfig> {
    let mut grid = Vec::new();
    for model in ["demo", "ablation"] {
        for t in [
            "zero_shot",
            "self_reflection",
            "episodic_retrieval",
            "episodic_retrieval + self_reflection",
        ] {
            grid.push(PipelineConfig::new(t.parse::<Technique>().unwrap(), model));
        }
    }
    grid
}

fn bench_determinism() -> Result<String, String> {
    let ctx = bench_context()?;
    let grid = bench_grid();
    let render = |run: &cpbench::experiments::BenchRun| {
        (
            run.table.to_json(),
            emit_report(
                &run.table,
                ReportFormat::Markdown,
                &ReportOptions::default(),
            ),
        )
    };
    let first = run_benchmark(
        &ctx,
        &grid,
        &BenchOptions {
            workers: 2,
            ..Default::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let second = run_benchmark(&ctx, &grid, &BenchOptions::default()).map_err(|e| e.to_string())?;
    ensure(render(&first) == render(&second), || {
        "two runs differ".into()
    })?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("bench.jsonl");
    let interrupted = run_benchmark(
        &ctx,
        &grid,
        &BenchOptions {
            workers: 1,
            checkpoint: Some(log.clone()),
            max_new_solves: Some(17),
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(interrupted.interrupted, || "run was not interrupted".into())?;
    let mut f = std::fs::OpenOptions::new()
        .append(true)
        .open(&log)
        .map_err(|e| e.to_string())?;
    f.write_all(b"{\"record\":\"exchange\",\"problem_id\":\"toll")
        .map_err(|e| e.to_string())?;
    let resumed = run_benchmark(
        &ctx,
        &grid,
        &BenchOptions {
            workers: 2,
            checkpoint: Some(log),
            max_new_solves: None,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(render(&resumed) == render(&first), || {
        "resumed run differs".into()
    })?;
    ensure(first.table.cells.iter().all(|c| c.complete()), || {
        "incomplete cells".into()
    })?;
    Ok(format!(
        "{} cells, byte-identical across 2 runs and a resumed run",
        grid.len()
    ))
}

fn testsynth_validation() -> Result<String, String> {
    let mut corpus = fixture_corpus();
    let judge = Judge::default().with_workers(1);
    let fresh = Judge::default().with_workers(1);
    let client = fixture_client("scripted.json");
    let config = SynthConfig {
        random: 4,
        corner: 3,
        unit_fraction: 0.3,
    };
    let mut verified = 0;
    for problem in &mut corpus.problems {
        let before: HashSet<String> = problem
            .unit_tests
            .iter()
            .chain(&problem.hidden_tests)
            .map(|t| t.test_id.clone())
            .collect();
        let sampling = Default::default();
        let mut session = Session::new(&*client, &sampling);
        synthesize_for_problem(&mut session, &judge, problem, config).map_err(|e| e.to_string())?;
        let reference = fresh
            .compile(&problem.reference_code)
            .map_err(|e| e.to_string())?
            .map_err(|d| format!("reference does not compile: {d}"))?;
        for t in problem.unit_tests.iter().chain(&problem.hidden_tests) {
            if before.contains(&t.test_id) {
                continue;
            }
            let run = fresh
                .run(&reference, &t.input, problem.limits)
                .map_err(|e| e.to_string())?;
            ensure(run.verdict == Verdict::Accepted, || {
                format!("{} {}: {:?}", problem.problem_id, t.test_id, run.verdict)
            })?;
            ensure(run.stdout == t.expected_output, || {
                format!(
                    "{} {}: expected output differs from a fresh run",
                    problem.problem_id, t.test_id
                )
            })?;
            verified += 1;
        }
        let unit: HashSet<&[u8]> = problem
            .unit_tests
            .iter()
            .map(|t| t.input.as_slice())
            .collect();
        ensure(
            problem
                .hidden_tests
                .iter()
                .all(|t| !unit.contains(t.input.as_slice())),
            || format!("{}: unit and hidden share an input", problem.problem_id),
        )?;
    }
    ensure(verified > 0, || "no tests were synthesized".into())?;
    Ok(format!("{verified} synthesized tests verified"))
}

fn error_arithmetic() -> Result<String, String> {
    let ctx = bench_context()?;
    let run =
        run_benchmark(&ctx, &bench_grid(), &BenchOptions::default()).map_err(|e| e.to_string())?;
    let traces = run.traces;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for size in 1..=traces.len() {
        let sample: Vec<_> = traces.choose_multiple(&mut rng, size).cloned().collect();
        let dist = error_distribution(&sample).map_err(|e| e.to_string())?;
        for m in &dist.models {
            let sum: f64 = ErrorCategory::ALL
                .iter()
                .map(|&c| m.percent(c))
                .sum::<f64>()
                + m.accepted;
            ensure((sum - 100.0).abs() <= 0.05, || {
                format!("{}: sums to {sum}", m.model)
            })?;
        }
    }

    let by_id = |id: &str| {
        traces
            .iter()
            .find(|t| {
                t.problem_id == id
                    && t.config.technique == Technique::ZERO_SHOT
                    && t.config.model_name == "demo"
            })
            .cloned()
            .unwrap()
    };
    let mut hand = vec![
        by_id("orchard-walk"),
        by_id("signal-relay"),
        by_id("toll-road"),
    ];
    let mut tle = by_id("toll-road");
    let report = tle.hidden_report.as_mut().unwrap();
    report.per_test[0].result.verdict = Verdict::TimeLimit;
    report.per_test[0].output_match = false;
    report.passed = false;
    tle.outcome = Outcome::Failed;
    hand.push(tle);
    let dist = error_distribution(&hand).map_err(|e| e.to_string())?;
    let m = &dist.models[0];
    let got = (
        m.percent(ErrorCategory::WrongAnswer),
        m.percent(ErrorCategory::TimeLimit),
        m.accepted,
    );
    ensure(got == (50.0, 25.0, 25.0), || {
        format!("hand fixture gave {got:?}")
    })?;

    let published = [
        [58.81, 5.33, 0.0, 10.16, 1.38, 24.3],
        [28.95, 25.06, 0.0, 6.83, 0.77, 38.4],
        [27.87, 23.56, 0.0, 5.78, 0.59, 42.2],
    ];
    for row in published {
        let sum: f64 = row.iter().sum();
        ensure((sum - 100.0).abs() <= 0.05, || {
            format!("published row sums to {sum}")
        })?;
    }
    Ok(format!(
        "{} random subsets, 2 WA + 1 TLE + 1 solved = 50/25/25",
        traces.len()
    ))
}

fn main() {
    let criteria: [(&str, Duration, Check); 8] = [
        (
            "pass@k oracle equivalence",
            Duration::from_secs(1),
            pass_at_k_oracle,
        ),
        ("verdict suite", Duration::from_secs(30), verdict_suite),
        (
            "leave-one-out exclusion",
            Duration::from_secs(5),
            leave_one_out,
        ),
        (
            "ablation direction",
            Duration::from_secs(60),
            ablation_direction,
        ),
        (
            "reflection-loop contract",
            Duration::from_secs(30),
            reflection_contract,
        ),
        (
            "benchmark determinism with resume",
            Duration::from_secs(120),
            bench_determinism,
        ),
        (
            "test-synthesis validation",
            Duration::from_secs(60),
            testsynth_validation,
        ),
        (
            "error-distribution arithmetic",
            Duration::from_secs(60),
            error_arithmetic,
        ),
    ];
    let mut out = std::io::stdout().lock();
    let mut failures = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= limit {
                Ok(detail)
            } else {
                Err(format!("{detail}; took longer than {limit:?}"))
            }
        });
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(e) => ("FAIL", e.as_str()),
        };
        writeln!(
            out,
            "{tag} {name}: {detail} [{:.2}s of {}s]",
            elapsed.as_secs_f64(),
            limit.as_secs()
        )
        .unwrap();
        failures += result.is_err() as usize;
    }
    if failures > 0 {
        writeln!(out, "{failures} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
