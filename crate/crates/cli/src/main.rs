use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use cpbench::agent::{solve, Session, Technique};
use cpbench::config::Config;
use cpbench::corpus::{category_counts, load_corpus, validate_reference, write_problem, Corpus};
use cpbench::experiments::{
    emit_report, error_distribution, error_markdown, read_traces, run_benchmark, sweep, sweep_markdown, BenchContext,
    BenchOptions, ReportFormat, ReportOptions, ResultsTable, SweepParam,
};
use cpbench::retrieval::{build_semantic_documents, load_chapters, Index};
use cpbench::testsynth::{synthesize_for_problem, SynthConfig};
use cpbench_server::{AppState, SessionStore};

#[derive(Parser)]
#[command(name = "cpbench", version, about = "Judge, solve, and benchmark competitive-programming agents")]
struct Cli {
    /// Configuration file. Defaults to ./cpbench.toml when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus directory, overriding the configuration.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and check a problem directory tree, optionally copying it into
    /// the corpus.
    Ingest {
        dir: PathBuf,
        /// Write the validated problems here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every reference solution against its unit and hidden tests.
    Validate {
        #[arg(long)]
        problem: Option<String>,
    },
    /// Generate tests with a model and add them to the corpus.
    SynthTests {
        /// A problem id, or `all`.
        target: String,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = SynthConfig::default().random)]
        random: usize,
        #[arg(long, default_value_t = SynthConfig::default().corner)]
        corner: usize,
        #[arg(long, default_value_t = SynthConfig::default().unit_fraction)]
        unit_fraction: f64,
    },
    /// Solve one problem and print the outcome.
    Solve {
        problem: String,
        #[arg(long)]
        technique: Technique,
        #[arg(long)]
        model: String,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        i: Option<usize>,
        /// Write the full trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the configuration grid over the corpus.
    Bench {
        /// File holding `[[bench.grid]]` entries; defaults to --config.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Benchmark one technique over several values of p or i.
    Sweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
        #[arg(long)]
        technique: Technique,
        #[arg(long)]
        model: String,
    },
    /// Render a results table written by `bench`.
    Report {
        #[arg(long, default_value = "runs/results.json")]
        results: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        /// Show deltas relative to this technique.
        #[arg(long)]
        relative_to: Option<String>,
        /// Also print the error distribution from this trace log.
        #[arg(long)]
        errors: Option<PathBuf>,
    },
    /// Host tutoring sessions over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None if Path::new("cpbench.toml").is_file() => Ok(Config::load(Path::new("cpbench.toml"))?),
        None => Ok(Config::default()),
    }
}

fn corpus_dir(cli: &Cli, config: &Config) -> PathBuf {
    cli.corpus
        .clone()
        .or_else(|| config.corpus.clone())
        .unwrap_or_else(|| PathBuf::from("corpus"))
}

fn semantic_index(config: &Config) -> Result<Option<Index>> {
    let dir = config.chapters.clone().unwrap_or_else(|| PathBuf::from("chapters"));
    if !dir.is_dir() {
        return Ok(None);
    }
    let docs = build_semantic_documents(&load_chapters(&dir)?);
    if docs.is_empty() {
        return Ok(None);
    }
    Ok(Some(Index::build(docs)?))
}

fn context(config: &Config, corpus: Corpus) -> Result<BenchContext> {
    let ctx = BenchContext::new(
        corpus,
        config.judge.build(),
        config.registry()?,
        config.bench.eval_mode(),
        config.bench.ablation,
    )?;
    Ok(match semantic_index(config)? {
        Some(index) => ctx.with_semantic(index),
        None => ctx,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = load_config(cli.config.as_deref())?;
    let corpus_root = corpus_dir(&cli, &config);

    match &cli.command {
        Command::Ingest { dir, out } => {
            let corpus = load_corpus(dir)?;
            println!("{} problems, fingerprint {}", corpus.len(), corpus.fingerprint());
            for (category, n) in category_counts(&corpus) {
                println!("  {category}: {n}");
            }
            if let Some(out) = out {
                for p in &corpus.problems {
                    write_problem(out, p)?;
                }
                println!("wrote {}", out.display());
            }
        }
        Command::Validate { problem } => {
            let corpus = load_corpus(&corpus_root)?;
            let judge = config.judge.build();
            let mut failed = 0;
            for p in corpus.problems.iter().filter(|p| problem.as_ref().is_none_or(|id| *id == p.problem_id)) {
                let report = validate_reference(p, &judge)?;
                let passed = report.per_test.iter().filter(|t| t.verdict.is_accepted()).count();
                println!(
                    "{:<24} {} ({passed}/{} tests)",
                    p.problem_id,
                    if report.pass { "ok" } else { "FAIL" },
                    report.per_test.len()
                );
                if !report.pass {
                    failed += 1;
                }
            }
            if failed > 0 {
                bail!("{failed} reference solution(s) failed");
            }
        }
        Command::SynthTests {
            target,
            model,
            random,
            corner,
            unit_fraction,
        } => {
            let mut corpus = load_corpus(&corpus_root)?;
            let judge = config.judge.build();
            let registry = config.registry()?;
            let sampling = config.pipeline(Technique::ZERO_SHOT, model).sampling;
            let synth = SynthConfig {
                random: *random,
                corner: *corner,
                unit_fraction: *unit_fraction,
            };
            let mut matched = 0;
            for p in corpus.problems.iter_mut().filter(|p| target == "all" || *target == p.problem_id) {
                matched += 1;
                let client = registry.client(model)?;
                let mut session = Session::new(&*client, &sampling);
                let summary = synthesize_for_problem(&mut session, &judge, p, synth)?;
                write_problem(&corpus_root, p)?;
                println!(
                    "{:<24} generated {}, added {} unit and {} hidden, {} duplicates",
                    summary.problem_id,
                    summary.generated,
                    summary.partition.added_unit,
                    summary.partition.added_hidden,
                    summary.partition.duplicates
                );
            }
            if matched == 0 {
                bail!("no problem named {target:?}");
            }
        }
        Command::Solve {
            problem,
            technique,
            model,
            p,
            i,
            trace,
        } => {
            let ctx = context(&config, load_corpus(&corpus_root)?)?;
            let problem = ctx
                .corpus
                .get(problem)
                .with_context(|| format!("no problem named {problem:?}"))?;
            let mut pipeline = config.pipeline(technique.clone(), model);
            if let Some(p) = p {
                pipeline.p = *p;
            }
            if let Some(i) = i {
                pipeline.i = *i;
            }
            let client = ctx.models.client(model)?;
            let result = solve(problem, &pipeline, &*client, &ctx.judge, ctx.retriever())?;
            println!(
                "{}: {:?} after {} generation(s)",
                result.problem_id,
                result.outcome,
                result.solution_generations()
            );
            if let Some(path) = trace {
                write(path, &(serde_json::to_string_pretty(&result)? + "\n"))?;
            }
        }
        Command::Bench {
            grid,
            out,
            workers,
            checkpoint,
        } => {
            let config = match grid {
                Some(path) => Config::load(path)?,
                None => config.clone(),
            };
            let configs = config.grid();
            if configs.is_empty() {
                log::warn!("the grid is empty");
            }
            let corpus_root = cli.corpus.clone().or_else(|| config.corpus.clone()).unwrap_or(corpus_root);
            let ctx = context(&config, load_corpus(&corpus_root)?)?;
            let options = BenchOptions {
                workers: workers.unwrap_or(config.bench.workers),
                checkpoint: checkpoint.clone().or_else(|| config.bench.checkpoint.clone()),
                max_new_solves: None,
            };
            let run = run_benchmark(&ctx, &configs, &options)?;
            write(&out.join("results.json"), &run.table.to_json())?;
            let markdown = emit_report(&run.table, ReportFormat::Markdown, &ReportOptions::default());
            write(&out.join("report.md"), &markdown)?;
            write(
                &out.join("report.csv"),
                &emit_report(&run.table, ReportFormat::Csv, &ReportOptions::default()),
            )?;
            if !run.traces.is_empty() {
                write(&out.join("errors.md"), &error_markdown(&error_distribution(&run.traces)?))?;
            }
            print!("{markdown}");
        }
        Command::Sweep {
            param,
            values,
            technique,
            model,
        } => {
            let ctx = context(&config, load_corpus(&corpus_root)?)?;
            let base = config.pipeline(technique.clone(), model);
            let options = BenchOptions {
                workers: config.bench.workers,
                ..Default::default()
            };
            let rows = sweep(&ctx, &base, *param, values, &options)?;
            print!("{}", sweep_markdown(&param.to_string(), &rows));
        }
        Command::Report {
            results,
            format,
            relative_to,
            errors,
        } => {
            let text = std::fs::read_to_string(results).with_context(|| format!("reading {}", results.display()))?;
            let table: ResultsTable = serde_json::from_str(&text)?;
            let options = ReportOptions {
                relative_to: relative_to.clone(),
            };
            print!("{}", emit_report(&table, *format, &options));
            if let Some(log) = errors {
                print!("\n{}", error_markdown(&error_distribution(&read_traces(log)?)?));
            }
        }
        Command::Serve { port, host } => {
            let corpus = load_corpus(&corpus_root)?;
            let store = match &config.server.store {
                Some(dir) => SessionStore::on_disk(dir)?,
                None => SessionStore::on_disk("sessions")?,
            };
            let token = config
                .server
                .token_env
                .as_deref()
                .and_then(|var| std::env::var(var).ok());
            let sampling: BTreeMap<_, _> = config
                .models
                .iter()
                .map(|(name, m)| (name.clone(), m.sampling().clone()))
                .collect();
            let state = AppState::new(corpus, config.judge.build(), config.registry()?, store)?
                .with_token(token)
                .with_sampling(sampling);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind((host.as_str(), *port)).await?;
                cpbench_server::serve(listener, Arc::new(state)).await
            })?;
        }
    }
    Ok(())
}
