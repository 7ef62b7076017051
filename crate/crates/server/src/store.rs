//! One JSON file per session, replaced atomically on every change.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::session::Session;

#[derive(Debug, Clone, Default)]
pub struct SessionStore {
    dir: Option<PathBuf>,
}

impl SessionStore {
    /// Sessions live only in memory.
    pub fn in_memory() -> Self {
        Self { dir: None }
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn save(&self, session: &Session) -> std::io::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        serde_json::to_writer_pretty(&mut tmp, session)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(dir.join(format!("{}.json", session.session_id)))
            .map_err(|e| e.error)?;
        Ok(())
    }

    /// Every stored session, sorted by creation time then id.
    pub fn load_all(&self) -> std::io::Result<Vec<Session>> {
        let Some(dir) = &self.dir else { return Ok(Vec::new()) };
        let mut out = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().is_none_or(|e| e != "json") {
                continue;
            }
            let text = std::fs::read_to_string(&path)?;
            match serde_json::from_str::<Session>(&text) {
                Ok(s) => out.push(s),
                Err(e) => log::warn!("skipping unreadable session file {}: {e}", path.display()),
            }
        }
        out.sort_by(|a, b| (a.created_ms, &a.session_id).cmp(&(b.created_ms, &b.session_id)));
        Ok(out)
    }
}
