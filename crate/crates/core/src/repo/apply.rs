use thiserror::Error;

use super::diff::{FilePatch, Hunk, PatchCandidate};
use super::{Repository, SourceUnit};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ApplyError {
    #[error("hunk {hunk} does not apply to {path}")]
    ContextMismatch { path: String, hunk: usize },
    #[error("patch targets missing file {0}")]
    FileMissing(String),
}

struct Text {
    lines: Vec<String>,
    trailing_newline: bool,
}

impl Text {
    fn parse(content: &str) -> Text {
        if content.is_empty() {
            return Text {
                lines: Vec::new(),
                trailing_newline: true,
            };
        }
        let trailing_newline = content.ends_with('\n');
        let body = content.strip_suffix('\n').unwrap_or(content);
        Text {
            lines: body.split('\n').map(str::to_string).collect(),
            trailing_newline,
        }
    }

    fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        if self.trailing_newline && !self.lines.is_empty() {
            out.push('\n');
        }
        out
    }
}

/// Applies `patch` to a copy of `repo`. The input is never
/// modified.
///
/// Each hunk is tried at its declared position first, then at the nearest
/// offset (earlier offset wins a tie) where its old lines match exactly.
pub fn apply_patch(repo: &Repository, patch: &PatchCandidate) -> Result<Repository, ApplyError> {
    if patch.files.is_empty() {
        return Ok(repo.clone());
    }
    let mut units: Vec<SourceUnit> = repo.units.clone();
    for file in &patch.files {
        apply_file(&mut units, file)?;
    }
    Ok(Repository::from_units(repo.root.clone(), units)
        .expect("patch application keeps paths unique"))
}

fn apply_file(units: &mut Vec<SourceUnit>, file: &FilePatch) -> Result<(), ApplyError> {
    let path_for_errors = file.path().to_string();
    let existing = file
        .old_path
        .as_ref()
        .map(|p| units.iter().position(|u| &u.path == p));
    let source = match existing {
        Some(Some(idx)) => Text::parse(&units[idx].content),
        Some(None) => return Err(ApplyError::FileMissing(path_for_errors)),
        None => {
            if let Some(new) = &file.new_path {
                if units.iter().any(|u| &u.path == new) {
                    return Err(ApplyError::ContextMismatch {
                        path: new.clone(),
                        hunk: 0,
                    });
                }
            }
            Text::parse("")
        }
    };
    let patched = apply_hunks(&source, &file.hunks, &path_for_errors)?;
    if let Some(Some(idx)) = existing {
        units.remove(idx);
    }
    if let Some(new_path) = &file.new_path {
        if let Some(pos) = units.iter().position(|u| &u.path == new_path) {
            units.remove(pos);
        }
        units.push(SourceUnit::new(new_path.clone(), patched.render()));
    }
    Ok(())
}

fn apply_hunks(source: &Text, hunks: &[Hunk], path: &str) -> Result<Text, ApplyError> {
    let mut out: Vec<String> = Vec::with_capacity(source.lines.len());
    let mut trailing_newline = source.trailing_newline;
    let mut cursor = 0usize;
    for (idx, hunk) in hunks.iter().enumerate() {
        let old: Vec<&str> = hunk.old_lines().collect();
        let declared = hunk.old_begin().saturating_sub(1);
        let found = locate(&source.lines, &old, declared, cursor).ok_or_else(|| {
            ApplyError::ContextMismatch {
                path: path.to_string(),
                hunk: idx,
            }
        })?;
        out.extend(source.lines[cursor..found].iter().cloned());
        out.extend(hunk.new_lines().map(str::to_string));
        cursor = found + old.len();
        if cursor == source.lines.len() {
            if hunk.new_missing_newline {
                trailing_newline = false;
            } else if hunk.old_missing_newline {
                trailing_newline = true;
            }
        }
    }
    out.extend(source.lines[cursor..].iter().cloned());
    Ok(Text {
        lines: out,
        trailing_newline,
    })
}

fn locate(lines: &[String], old: &[&str], declared: usize, min: usize) -> Option<usize> {
    if old.len() > lines.len() {
        return None;
    }
    let max = lines.len() - old.len();
    let matches_at =
        |pos: usize| pos >= min && pos <= max && lines[pos..pos + old.len()].iter().zip(old).all(|(a, b)| a == b);
    let declared = declared.clamp(min.min(max), max);
    for offset in 0..=lines.len() {
        if let Some(pos) = declared.checked_sub(offset) {
            if matches_at(pos) {
                return Some(pos);
            }
        }
        if offset > 0 && matches_at(declared + offset) {
            return Some(declared + offset);
        }
    }
    None
}
