//! TOML configuration shared by the command-line tool and the tutoring
//! server.
//!
//! ```toml
//! corpus = "corpus"
//! chapters = "chapters"
//!
//! [judge]
//! workers = 2
//! isolate_network = true
//!
//! [bench]
//! workers = 1
//! checkpoint = "runs/bench.jsonl"
//! mode = "leave_one_out"
//!
//! [[bench.grid]]
//! technique = "episodic_retrieval + self_reflection"
//! model = "scripted"
//! p = 2
//! i = 2
//!
//! [models.scripted]
//! kind = "scripted"
//! fixture = "fixtures/scripted.json"
//!
//! [models.remote]
//! kind = "openai"
//! endpoint = "https://api.example.com/v1"
//! model = "some-model"
//! api_key_env = "CPBENCH_API_KEY"
//! requests_per_minute = 60
//!
//! [server]
//! token_env = "CPBENCH_SERVER_TOKEN"
//! store = "sessions"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Secrets never appear in the file; only the names of the environment
//! variables that hold them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{
    ClientError, HttpClient, HttpClientConfig, LmClient, PipelineConfig, Sampling, ScriptedClient,
    Technique,
};
use crate::experiments::{EvalMode, ModelRegistry};
use crate::judge::{Judge, SandboxOptions, ToolchainProfile, DEFAULT_OUTPUT_CAP};
use crate::retrieval::{Composition, EpisodicAblation};

#[derive(Debug, thiserror::Error)]
pub enum ConfigFileError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("model {name}: {source}")]
    Model { name: String, source: ClientError },
    #[error("grid entry {index} names model {model:?}, which is not configured")]
    UnknownGridModel { index: usize, model: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeSection {
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default = "yes")]
    pub isolate_network: bool,
    #[serde(default = "default_cap")]
    pub output_cap: usize,
    #[serde(default)]
    pub toolchain: Option<ToolchainProfile>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_cap() -> usize {
    DEFAULT_OUTPUT_CAP
}

impl Default for JudgeSection {
    fn default() -> Self {
        Self {
            workers: one(),
            isolate_network: yes(),
            output_cap: default_cap(),
            toolchain: None,
        }
    }
}

impl JudgeSection {
    pub fn build(&self) -> Judge {
        Judge::new(self.toolchain.clone().unwrap_or_default())
            .with_workers(self.workers)
            .with_sandbox(SandboxOptions {
                output_cap: self.output_cap,
                isolate_network: self.isolate_network,
            })
    }
}

/// One benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub technique: Technique,
    pub model: String,
    #[serde(default)]
    pub p: Option<usize>,
    #[serde(default)]
    pub i: Option<usize>,
    #[serde(default)]
    pub composition: Option<Composition>,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    LeaveOneOut,
    TrainTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub mode: ModeName,
    /// Problem ids for `train_test` mode.
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
    #[serde(default)]
    pub ablation: EpisodicAblation,
    #[serde(default)]
    pub grid: Vec<GridEntry>,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            workers: one(),
            checkpoint: None,
            mode: ModeName::default(),
            train: Vec::new(),
            test: Vec::new(),
            ablation: EpisodicAblation::default(),
            grid: Vec::new(),
        }
    }
}

impl BenchSection {
    pub fn eval_mode(&self) -> EvalMode {
        match self.mode {
            ModeName::LeaveOneOut => EvalMode::LeaveOneOut,
            ModeName::TrainTest => EvalMode::TrainTest {
                train: self.train.clone(),
                test: self.test.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSection {
    Scripted {
        fixture: PathBuf,
        #[serde(default)]
        sampling: Sampling,
    },
    #[serde(rename = "openai")]
    OpenAi {
        #[serde(flatten)]
        http: HttpClientConfig,
        #[serde(default)]
        sampling: Sampling,
    },
}

impl ModelSection {
    pub fn sampling(&self) -> &Sampling {
        match self {
            Self::Scripted { sampling, .. } | Self::OpenAi { sampling, .. } => sampling,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn LmClient>, ClientError> {
        Ok(match self {
            Self::Scripted { fixture, .. } => Arc::new(ScriptedClient::from_path(fixture)?),
            Self::OpenAi { http, .. } => Arc::new(HttpClient::new(http.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSection {
    /// Environment variable holding the bearer token. Unset disables auth.
    #[serde(default)]
    pub token_env: Option<String>,
    /// Directory for session files.
    #[serde(default)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub chapters: Option<PathBuf>,
    #[serde(default)]
    pub judge: JudgeSection,
    #[serde(default)]
    pub bench: BenchSection,
    #[serde(default)]
    pub models: BTreeMap<String, ModelSection>,
    #[serde(default)]
    pub server: ServerSection,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigFileError> {
        let mut config: Config = toml::from_str(text).map_err(|e| ConfigFileError::Parse {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.corpus,
            &mut config.chapters,
            &mut config.bench.checkpoint,
            &mut config.server.store,
        ]
        .into_iter()
        .flatten()
        {
            rebase(base, p);
        }
        for m in config.models.values_mut() {
            if let ModelSection::Scripted { fixture, .. } = m {
                rebase(base, fixture);
            }
        }
        for (index, g) in config.bench.grid.iter().enumerate() {
            if !config.models.contains_key(&g.model) {
                return Err(ConfigFileError::UnknownGridModel {
                    index,
                    model: g.model.clone(),
                });
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn registry(&self) -> Result<ModelRegistry, ConfigFileError> {
        let mut reg = ModelRegistry::new();
        for (name, m) in &self.models {
            let client = m.build().map_err(|source| ConfigFileError::Model {
                name: name.clone(),
                source,
            })?;
            reg.insert(name.clone(), client);
        }
        Ok(reg)
    }

    /// Pipeline configuration for a technique and model, with the model's
    /// sampling parameters.
    pub fn pipeline(&self, technique: Technique, model: &str) -> PipelineConfig {
        let mut c = PipelineConfig::new(technique, model);
        if let Some(m) = self.models.get(model) {
            c.sampling = m.sampling().clone();
        }
        c
    }

    /// The benchmark grid as pipeline configurations. Entry sampling
    /// overrides model sampling key by key.
    pub fn grid(&self) -> Vec<PipelineConfig> {
        self.bench
            .grid
            .iter()
            .map(|g| {
                let mut c = self.pipeline(g.technique.clone(), &g.model);
                if let Some(p) = g.p {
                    c.p = p;
                }
                if let Some(i) = g.i {
                    c.i = i;
                }
                if let Some(comp) = g.composition {
                    c.composition = comp;
                }
                c.sampling.extend(g.sampling.clone());
                c
            })
            .collect()
    }
}
