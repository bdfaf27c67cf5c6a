//! Append-only mutation log, one JSON object per line.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use sxq_core::response::MutateRequest;
use sxq_core::tree::{MemoryTree, MutationError};

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    #[error("journal {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("journal {path} line {line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("journal entry {index} no longer applies: {source}")]
    Replay { index: usize, source: MutationError },
}

pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, JournalError> {
        let path = path.into();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| JournalError::Io { path: path.clone(), source })?;
        Ok(Journal { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and syncs one entry.
    pub fn append(&mut self, entry: &MutateRequest) -> Result<(), JournalError> {
        let mut line = serde_json::to_string(entry).expect("mutation requests serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.sync_data())
            .map_err(|source| JournalError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

/// Reads every entry; a missing file is an empty journal.
pub fn read_journal(path: &Path) -> Result<Vec<MutateRequest>, JournalError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(source) => {
            return Err(JournalError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    let mut entries = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| JournalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line).map_err(|source| JournalError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(entries)
}

pub fn replay(mut tree: MemoryTree, entries: &[MutateRequest]) -> Result<MemoryTree, JournalError> {
    for (index, e) in entries.iter().enumerate() {
        tree = e
            .spec
            .apply(&tree, &e.summary)
            .map_err(|source| JournalError::Replay { index, source })?;
    }
    Ok(tree)
}
