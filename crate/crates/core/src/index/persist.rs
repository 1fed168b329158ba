//! Single-file on-disk form of the indices.
//!
//! ```text
//! CPPSCOPE-INDEX
//! format_version 1
//! repo_snapshot <hex>
//! <json body>
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::StructuralIndex;
use crate::intent::IntentIndex;
use crate::repo::Repository;

pub const MAGIC: &str = "CPPSCOPE-INDEX";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("index format version {found} is not supported (expected {FORMAT_VERSION})")]
    VersionMismatch { found: String },
    #[error("corrupt index: {0}")]
    CorruptIndex(String),
    #[error("index was built from snapshot {index} but the repository is at {repo}")]
    StaleIndex { index: String, repo: String },
}

/// Everything stored in an index file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexContainer {
    pub structural: StructuralIndex,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<IntentIndex>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn persist_container(container: &IndexContainer, path: &Path) -> Result<(), PersistError> {
    let body = serde_json::to_string(container).map_err(|e| PersistError::CorruptIndex(e.to_string()))?;
    let mut out = Vec::with_capacity(body.len() + 128);
    writeln!(out, "{MAGIC}").ok();
    writeln!(out, "format_version {FORMAT_VERSION}").ok();
    writeln!(out, "repo_snapshot {}", container.structural.repo_snapshot).ok();
    out.extend_from_slice(body.as_bytes());
    out.push(b'\n');
    // Write-then-rename so readers never observe a half-written file.
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(&out).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| io_err(path)(e.error))?;
    Ok(())
}

pub fn persist_index(index: &StructuralIndex, path: &Path) -> Result<(), PersistError> {
    persist_container(
        &IndexContainer {
            structural: index.clone(),
            intent: None,
        },
        path,
    )
}

pub fn load_container(path: &Path) -> Result<IndexContainer, PersistError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.splitn(4, '\n');
    if lines.next() != Some(MAGIC) {
        return Err(PersistError::CorruptIndex("missing magic header".into()));
    }
    let version = lines
        .next()
        .and_then(|l| l.strip_prefix("format_version "))
        .ok_or_else(|| PersistError::CorruptIndex("missing format_version line".into()))?;
    if version.trim() != FORMAT_VERSION.to_string() {
        return Err(PersistError::VersionMismatch {
            found: version.trim().to_string(),
        });
    }
    let snapshot = lines
        .next()
        .and_then(|l| l.strip_prefix("repo_snapshot "))
        .ok_or_else(|| PersistError::CorruptIndex("missing repo_snapshot line".into()))?;
    let body = lines
        .next()
        .ok_or_else(|| PersistError::CorruptIndex("missing body".into()))?;
    let mut container: IndexContainer =
        serde_json::from_str(body).map_err(|e| PersistError::CorruptIndex(e.to_string()))?;
    if container.structural.repo_snapshot != snapshot {
        return Err(PersistError::CorruptIndex("header and body snapshots differ".into()));
    }
    container.structural.rebuild_maps();
    container
        .structural
        .check_consistency()
        .map_err(PersistError::CorruptIndex)?;
    Ok(container)
}

pub fn load_index(path: &Path) -> Result<StructuralIndex, PersistError> {
    load_container(path).map(|c| c.structural)
}

/// `Err(StaleIndex)` when the index no longer describes `repo`. Callers
/// decide whether that is a warning or fatal.
pub fn check_fresh(index: &StructuralIndex, repo: &Repository) -> Result<(), PersistError> {
    if index.repo_snapshot == repo.snapshot_id {
        Ok(())
    } else {
        Err(PersistError::StaleIndex {
            index: index.repo_snapshot.clone(),
            repo: repo.snapshot_id.clone(),
        })
    }
}
