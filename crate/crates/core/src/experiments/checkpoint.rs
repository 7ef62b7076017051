//! Append-only JSON-lines trace log. Each finished solve writes one
//! `exchange` record per model call followed by one `outcome` record holding
//! the whole trace; resumption reads only `outcome` records, keyed by
//! `(problem_id, config_hash)`.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::agent::{Exchange, SolveTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum LogRecord {
    Exchange {
        problem_id: String,
        config_hash: String,
        exchange: Exchange,
    },
    Outcome {
        problem_id: String,
        config_hash: String,
        trace: Box<SolveTrace>,
    },
}

#[derive(Debug)]
pub struct Checkpoint {
    path: PathBuf,
    file: File,
    finished: BTreeMap<(String, String), SolveTrace>,
}

impl Checkpoint {
    /// Opens or creates the log. A torn final line (from an interrupted
    /// write) is cut off; a malformed line elsewhere is an error.
    pub fn open(path: &Path) -> Result<Self, BenchError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        let fail = |reason: String| BenchError::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let text = match std::fs::read(path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut finished = BTreeMap::new();
        let mut good_len = 0;
        let mut offset = 0;
        let lines: Vec<&[u8]> = text.split_inclusive(|&b| b == b'\n').collect();
        for (n, line) in lines.iter().enumerate() {
            offset += line.len();
            let last = n + 1 == lines.len();
            let complete = line.ends_with(b"\n");
            match serde_json::from_slice::<LogRecord>(line) {
                Ok(_) if !complete => {
                    log::warn!(
                        "{}: final line lacks a newline; discarding it",
                        path.display()
                    );
                    break;
                }
                Ok(LogRecord::Outcome {
                    problem_id,
                    config_hash,
                    trace,
                }) => {
                    finished.insert((problem_id, config_hash), *trace);
                }
                Ok(LogRecord::Exchange { .. }) => {}
                Err(_) if last => {
                    log::warn!("{}: discarding torn final line", path.display());
                    break;
                }
                Err(e) => return Err(fail(format!("line {}: {e}", n + 1))),
            }
            good_len = offset;
        }
        if good_len < text.len() {
            let f = OpenOptions::new().write(true).open(path)?;
            f.set_len(good_len as u64)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
            finished,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn finished(&self) -> &BTreeMap<(String, String), SolveTrace> {
        &self.finished
    }

    /// Appends a finished trace in one write.
    pub fn append(&mut self, trace: &SolveTrace) -> Result<(), BenchError> {
        let mut buf = String::new();
        for e in &trace.exchanges {
            let rec = LogRecord::Exchange {
                problem_id: trace.problem_id.clone(),
                config_hash: trace.config_hash.clone(),
                exchange: e.clone(),
            };
            buf.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            buf.push('\n');
        }
        let rec = LogRecord::Outcome {
            problem_id: trace.problem_id.clone(),
            config_hash: trace.config_hash.clone(),
            trace: Box::new(trace.clone()),
        };
        buf.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        buf.push('\n');
        self.file.write_all(buf.as_bytes())?;
        self.file.flush()?;
        self.finished.insert(
            (trace.problem_id.clone(), trace.config_hash.clone()),
            trace.clone(),
        );
        Ok(())
    }
}

/// Reads every finished trace from a log without opening it for writing.
pub fn read_traces(path: &Path) -> Result<Vec<SolveTrace>, BenchError> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        match serde_json::from_str::<LogRecord>(line) {
            Ok(LogRecord::Outcome { trace, .. }) => out.push(*trace),
            Ok(LogRecord::Exchange { .. }) => {}
            Err(e) if n + 1 == text.lines().count() => {
                log::warn!("{}: ignoring torn final line: {e}", path.display())
            }
            Err(e) => {
                return Err(BenchError::Checkpoint {
                    path: path.to_path_buf(),
                    reason: format!("line {}: {e}", n + 1),
                })
            }
        }
    }
    Ok(out)
}
