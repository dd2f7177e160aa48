// SPDX-License-Identifier: Apache-2.0

//! Append-only JSON Lines files.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

struct Inner {
    writer: BufWriter<File>,
    next_offset: u64,
}

/// One JSON record per line; appends are serialized and each gets the line
/// offset it was written at (0-based).
pub struct AppendLog<T> {
    path: PathBuf,
    inner: Mutex<Inner>,
    _marker: PhantomData<fn(&T)>,
}

impl<T> std::fmt::Debug for AppendLog<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AppendLog").field("path", &self.path).finish()
    }
}

impl<T: Serialize> AppendLog<T> {
    /// Opens `path` for appending, creating it if needed. Existing lines count
    /// toward offsets.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, JsonlError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| JsonlError::Io {
            path: path.display().to_string(),
            source,
        };
        let existing = match File::open(&path) {
            Ok(f) => BufReader::new(f).lines().map_while(Result::ok).filter(|l| !l.trim().is_empty()).count() as u64,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(io(e)),
        };
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io)?;
        Ok(Self {
            path,
            inner: Mutex::new(Inner {
                writer: BufWriter::new(file),
                next_offset: existing,
            }),
            _marker: PhantomData,
        })
    }

    pub fn append(&self, record: &T) -> Result<u64, JsonlError> {
        let line = serde_json::to_string(record).expect("records serialize");
        let mut g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let io = |source| JsonlError::Io {
            path: self.path.display().to_string(),
            source,
        };
        g.writer.write_all(line.as_bytes()).map_err(io)?;
        g.writer.write_all(b"\n").map_err(io)?;
        let off = g.next_offset;
        g.next_offset += 1;
        Ok(off)
    }

    pub fn flush(&self) -> Result<(), JsonlError> {
        let mut g = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        g.writer.flush().map_err(|source| JsonlError::Io {
            path: self.path.display().to_string(),
            source,
        })
    }

    pub fn len(&self) -> u64 {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).next_offset
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl<T> Drop for AppendLog<T> {
    fn drop(&mut self) {
        if let Ok(mut g) = self.inner.lock() {
            let _ = g.writer.flush();
        }
    }
}

/// Parses JSONL text, skipping blank lines. Errors carry the 1-based line.
pub fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, (usize, serde_json::Error)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| (i + 1, e)))
        .collect()
}

/// Reads every record of a JSONL file, skipping blank lines.
pub fn read_all<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, JsonlError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_lines(&text).map_err(|(line, source)| JsonlError::Parse {
        path: path.display().to_string(),
        line,
        source,
    })
}
