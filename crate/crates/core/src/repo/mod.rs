//! Repositories, issues, patches and tests.

mod apply;
mod diff;
mod issue;
mod runner;

use std::path::{Path, PathBuf};

use globset::{Glob, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

pub use apply::{apply_patch, ApplyError};
pub use diff::{
    parse_unified_diff, render_file_patches, DiffError, FilePatch, Hunk, HunkLine, PatchCandidate,
    PatchOrigin,
};
pub use issue::{is_identifier, is_qualified_name, IssueDescription};
pub use runner::{
    run_test, RunnerConfig, RunnerError, TestCase, TestOutcome, TestRole, TestStatus,
};

/// Default include patterns used when a caller does not supply any.
pub const DEFAULT_INCLUDE_GLOBS: &[&str] = &[
    "**/*.h", "**/*.hh", "**/*.hpp", "**/*.hxx", "**/*.inl", "**/*.c", "**/*.cc", "**/*.cpp",
    "**/*.cxx",
];

/// Hex SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Header,
    Source,
    Other,
}

impl UnitKind {
    pub fn from_path(path: &str) -> UnitKind {
        let ext = path.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
        match ext.as_deref() {
            Some("h" | "hh" | "hpp" | "hxx" | "h++" | "inl" | "ipp" | "tpp") => UnitKind::Header,
            Some("c" | "cc" | "cpp" | "cxx" | "c++" | "cp") => UnitKind::Source,
            _ => UnitKind::Other,
        }
    }

    pub fn is_code(self) -> bool {
        matches!(self, UnitKind::Header | UnitKind::Source)
    }
}

/// One file of a repository snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    /// Path relative to the repository root, `/`-separated.
    pub path: String,
    pub content: String,
    pub content_hash: String,
    pub kind: UnitKind,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> SourceUnit {
        let path = path.into();
        let content = content.into();
        SourceUnit {
            kind: UnitKind::from_path(&path),
            content_hash: digest(content.as_bytes()),
            path,
            content,
        }
    }
}

/// An immutable snapshot of a repository's files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Repository {
    pub root: PathBuf,
    /// Sorted by path; paths are unique.
    pub units: Vec<SourceUnit>,
    pub snapshot_id: String,
}

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("repository root not found: {0}")]
    RootNotFound(PathBuf),
    #[error("invalid include pattern {pattern:?}: {message}")]
    BadGlob { pattern: String, message: String },
    #[error("duplicate unit path {0}")]
    DuplicatePath(String),
}

/// A file that matched the include patterns but could not be read as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

impl Repository {
    /// Builds a snapshot from in-memory units.
    pub fn from_units(
        root: impl Into<PathBuf>,
        units: impl IntoIterator<Item = SourceUnit>,
    ) -> Result<Repository, RepoError> {
        let mut units: Vec<SourceUnit> = units.into_iter().collect();
        units.sort_by(|a, b| a.path.cmp(&b.path));
        if let Some(w) = units.windows(2).find(|w| w[0].path == w[1].path) {
            return Err(RepoError::DuplicatePath(w[0].path.clone()));
        }
        let snapshot_id = snapshot_of(&units);
        Ok(Repository {
            root: root.into(),
            units,
            snapshot_id,
        })
    }

    /// Convenience constructor from `(path, content)` pairs.
    pub fn from_files<P, C>(
        root: impl Into<PathBuf>,
        files: impl IntoIterator<Item = (P, C)>,
    ) -> Result<Repository, RepoError>
    where
        P: Into<String>,
        C: Into<String>,
    {
        Repository::from_units(root, files.into_iter().map(|(p, c)| SourceUnit::new(p, c)))
    }

    pub fn unit(&self, path: &str) -> Option<&SourceUnit> {
        self.units
            .binary_search_by(|u| u.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.units[i])
    }

    /// Writes every unit below `dir`, creating parent directories.
    pub fn materialize(&self, dir: &Path) -> std::io::Result<()> {
        for unit in &self.units {
            let target = dir.join(&unit.path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(target, &unit.content)?;
        }
        Ok(())
    }
}

fn snapshot_of(units: &[SourceUnit]) -> String {
    let mut hasher = Sha256::new();
    for unit in units {
        hasher.update(unit.path.as_bytes());
        hasher.update([0]);
        hasher.update(unit.content_hash.as_bytes());
        hasher.update([b'\n']);
    }
    hex::encode(hasher.finalize())
}

/// Loads every file below `root` matching one of `include_globs`.
///
/// Files that cannot be read as UTF-8 text are skipped and reported in the
/// second tuple element; they never abort the load.
pub fn load_repository(
    root: &Path,
    include_globs: &[String],
) -> Result<(Repository, Vec<SkippedFile>), RepoError> {
    if !root.is_dir() {
        return Err(RepoError::RootNotFound(root.to_path_buf()));
    }
    let mut builder = GlobSetBuilder::new();
    let patterns: Vec<String> = if include_globs.is_empty() {
        DEFAULT_INCLUDE_GLOBS.iter().map(|s| s.to_string()).collect()
    } else {
        include_globs.to_vec()
    };
    for pattern in patterns.iter().flat_map(|p| p.split(',')) {
        let pattern = pattern.trim();
        if pattern.is_empty() {
            continue;
        }
        let glob = Glob::new(pattern).map_err(|e| RepoError::BadGlob {
            pattern: pattern.to_string(),
            message: e.to_string(),
        })?;
        builder.add(glob);
        // `**/x` should also match `x` at the root.
        if let Some(rest) = pattern.strip_prefix("**/") {
            if let Ok(glob) = Glob::new(rest) {
                builder.add(glob);
            }
        }
    }
    let set = builder.build().map_err(|e| RepoError::BadGlob {
        pattern: patterns.join(","),
        message: e.to_string(),
    })?;

    let mut units = Vec::new();
    let mut skipped = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                let path = err
                    .path()
                    .and_then(|p| p.strip_prefix(root).ok())
                    .map(|p| p.to_string_lossy().replace('\\', "/"))
                    .unwrap_or_default();
                log::warn!("skipping unreadable entry {path}: {err}");
                skipped.push(SkippedFile {
                    path,
                    reason: err.to_string(),
                });
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else {
            continue;
        };
        let rel = rel.to_string_lossy().replace('\\', "/");
        if !set.is_match(&rel) {
            continue;
        }
        match std::fs::read(entry.path()) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(text) => units.push(SourceUnit::new(rel, text)),
                Err(_) => {
                    log::warn!("skipping non-UTF-8 file {rel}");
                    skipped.push(SkippedFile {
                        path: rel,
                        reason: "not valid UTF-8".into(),
                    });
                }
            },
            Err(err) => {
                log::warn!("skipping unreadable file {rel}: {err}");
                skipped.push(SkippedFile {
                    path: rel,
                    reason: err.to_string(),
                });
            }
        }
    }
    let repo = Repository::from_units(root, units)?;
    Ok((repo, skipped))
}
