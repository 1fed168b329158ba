//! Unified diff parsing and canonical rendering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::digest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum HunkLine {
    Context(String),
    Remove(String),
    Add(String),
}

impl HunkLine {
    pub fn text(&self) -> &str {
        match self {
            HunkLine::Context(s) | HunkLine::Remove(s) | HunkLine::Add(s) => s,
        }
    }

    pub fn in_old(&self) -> bool {
        !matches!(self, HunkLine::Add(_))
    }

    pub fn in_new(&self) -> bool {
        !matches!(self, HunkLine::Remove(_))
    }

    pub fn is_change(&self) -> bool {
        !matches!(self, HunkLine::Context(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    /// 1-based first old line; for an empty old range, the line after which
    /// the new lines are inserted.
    pub old_start: usize,
    pub old_len: usize,
    pub new_start: usize,
    pub new_len: usize,
    pub section: String,
    pub lines: Vec<HunkLine>,
    pub old_missing_newline: bool,
    pub new_missing_newline: bool,
}

impl Hunk {
    /// 1-based index of the first old line this hunk covers (insertion point
    /// for pure additions).
    pub fn old_begin(&self) -> usize {
        if self.old_len == 0 {
            self.old_start + 1
        } else {
            self.old_start
        }
    }

    pub fn old_lines(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter(|l| l.in_old()).map(|l| l.text())
    }

    pub fn new_lines(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().filter(|l| l.in_new()).map(|l| l.text())
    }

    /// Old-file line numbers touched by this hunk: each removed line, and the
    /// insertion anchor for runs of added lines.
    pub fn changed_old_lines(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut old_line = self.old_begin();
        for line in &self.lines {
            match line {
                HunkLine::Context(_) => old_line += 1,
                HunkLine::Remove(_) => {
                    out.push(old_line);
                    old_line += 1;
                }
                HunkLine::Add(_) => {
                    let anchor = old_line.saturating_sub(1).max(1);
                    if out.last() != Some(&anchor) {
                        out.push(anchor);
                    }
                }
            }
        }
        out.dedup();
        out
    }

    fn reversed(&self, new_start: usize) -> Hunk {
        Hunk {
            old_start: new_start,
            old_len: self.new_len,
            new_start: self.old_start,
            new_len: self.old_len,
            section: self.section.clone(),
            lines: self
                .lines
                .iter()
                .map(|l| match l {
                    HunkLine::Context(s) => HunkLine::Context(s.clone()),
                    HunkLine::Remove(s) => HunkLine::Add(s.clone()),
                    HunkLine::Add(s) => HunkLine::Remove(s.clone()),
                })
                .collect(),
            old_missing_newline: self.new_missing_newline,
            new_missing_newline: self.old_missing_newline,
        }
    }
}

/// All hunks for one file. `None` stands for `/dev/null`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePatch {
    pub old_path: Option<String>,
    pub new_path: Option<String>,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    /// The path this patch is "about": the new path unless the file is deleted.
    pub fn path(&self) -> &str {
        self.new_path
            .as_deref()
            .or(self.old_path.as_deref())
            .unwrap_or_default()
    }

    /// New-side start lines implied by applying the hunks at their declared
    /// old positions.
    pub fn computed_new_starts(&self) -> Vec<usize> {
        let mut delta: isize = 0;
        self.hunks
            .iter()
            .map(|h| {
                let first_new = h.old_begin() as isize + delta;
                delta += h.new_len as isize - h.old_len as isize;
                let start = if h.new_len == 0 { first_new - 1 } else { first_new };
                start.max(0) as usize
            })
            .collect()
    }

    pub fn reversed(&self) -> FilePatch {
        let starts = self.computed_new_starts();
        FilePatch {
            old_path: self.new_path.clone(),
            new_path: self.old_path.clone(),
            hunks: self
                .hunks
                .iter()
                .zip(starts)
                .map(|(h, s)| h.reversed(s))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchOrigin {
    Agent,
    External,
}

/// A candidate patch: raw diff text plus its parsed form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchCandidate {
    pub id: String,
    pub diff: String,
    pub touched_files: Vec<String>,
    pub origin: PatchOrigin,
    pub files: Vec<FilePatch>,
}

impl PatchCandidate {
    /// Builds a candidate from already-parsed file patches, rendering the
    /// canonical diff text.
    pub fn from_file_patches(files: Vec<FilePatch>, origin: PatchOrigin) -> PatchCandidate {
        let diff = render_file_patches(&files);
        PatchCandidate {
            id: candidate_id(&diff),
            touched_files: touched_files(&files),
            diff,
            origin,
            files,
        }
    }

    /// The inverse patch: applying it after `self` restores the original.
    pub fn reversed(&self) -> PatchCandidate {
        let files = self.files.iter().rev().map(FilePatch::reversed).collect();
        PatchCandidate::from_file_patches(files, self.origin)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiffError {
    #[error("malformed diff at line {line}: {message}")]
    MalformedDiff { line: usize, message: String },
}

fn malformed(line: usize, message: impl Into<String>) -> DiffError {
    DiffError::MalformedDiff {
        line,
        message: message.into(),
    }
}

pub(crate) fn candidate_id(diff: &str) -> String {
    digest(diff.as_bytes())[..16].to_string()
}

fn touched_files(files: &[FilePatch]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for f in files {
        for p in [&f.old_path, &f.new_path].into_iter().flatten() {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
    }
    out
}

fn header_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or("").trim_end();
    if raw == "/dev/null" {
        return None;
    }
    let stripped = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(stripped.to_string())
}

fn parse_range(s: &str) -> Option<(usize, usize)> {
    match s.split_once(',') {
        Some((a, b)) => Some((a.parse().ok()?, b.parse().ok()?)),
        None => Some((s.parse().ok()?, 1)),
    }
}

fn parse_hunk_header(line: &str) -> Option<(usize, usize, usize, usize, String)> {
    let rest = line.strip_prefix("@@ -")?;
    let (ranges, section) = rest.split_once(" @@")?;
    let (old, new) = ranges.split_once(" +")?;
    let (os, ol) = parse_range(old)?;
    let (ns, nl) = parse_range(new)?;
    Some((os, ol, ns, nl, section.trim_start().to_string()))
}

/// Parses unified diff text. Lines outside file headers and hunks (e.g.
/// `diff --git`, `index ...`) are ignored.
pub fn parse_unified_diff(text: &str) -> Result<PatchCandidate, DiffError> {
    let lines: Vec<&str> = text.split('\n').collect();
    let mut files: Vec<FilePatch> = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i].strip_suffix('\r').unwrap_or(lines[i]);
        if let Some(old) = line.strip_prefix("--- ") {
            let next = lines.get(i + 1).map(|l| l.strip_suffix('\r').unwrap_or(l));
            if let Some(new) = next.and_then(|l| l.strip_prefix("+++ ")) {
                let old_path = header_path(old);
                let new_path = header_path(new);
                if old_path.is_none() && new_path.is_none() {
                    return Err(malformed(i + 1, "both sides are /dev/null"));
                }
                files.push(FilePatch {
                    old_path,
                    new_path,
                    hunks: Vec::new(),
                });
                i += 2;
                continue;
            }
        }
        if line.starts_with("@@") {
            let Some(file) = files.last_mut() else {
                return Err(malformed(i + 1, "hunk before any file header"));
            };
            let (old_start, old_len, new_start, new_len, section) =
                parse_hunk_header(line).ok_or_else(|| malformed(i + 1, "bad hunk header"))?;
            let header_line = i + 1;
            i += 1;
            let mut hunk = Hunk {
                old_start,
                old_len,
                new_start,
                new_len,
                section,
                lines: Vec::new(),
                old_missing_newline: false,
                new_missing_newline: false,
            };
            let (mut old_seen, mut new_seen) = (0, 0);
            while old_seen < old_len || new_seen < new_len {
                let Some(raw) = lines.get(i) else {
                    return Err(malformed(header_line, "hunk body shorter than its header"));
                };
                let raw = raw.strip_suffix('\r').unwrap_or(raw);
                let body = if raw.is_empty() { " " } else { raw };
                let (tag, content) = body.split_at(1);
                match tag {
                    " " => {
                        hunk.lines.push(HunkLine::Context(content.to_string()));
                        old_seen += 1;
                        new_seen += 1;
                    }
                    "-" => {
                        hunk.lines.push(HunkLine::Remove(content.to_string()));
                        old_seen += 1;
                    }
                    "+" => {
                        hunk.lines.push(HunkLine::Add(content.to_string()));
                        new_seen += 1;
                    }
                    "\\" => mark_missing_newline(&mut hunk),
                    _ => return Err(malformed(i + 1, "hunk body shorter than its header")),
                }
                if old_seen > old_len || new_seen > new_len {
                    return Err(malformed(header_line, "hunk body longer than its header"));
                }
                i += 1;
            }
            while let Some(raw) = lines.get(i) {
                if raw.starts_with('\\') {
                    mark_missing_newline(&mut hunk);
                    i += 1;
                } else {
                    break;
                }
            }
            if let Some(prev) = file.hunks.last() {
                let prev_end = prev.old_begin() + prev.old_len;
                if hunk.old_begin() < prev_end {
                    return Err(malformed(header_line, "overlapping or out-of-order hunks"));
                }
            }
            file.hunks.push(hunk);
            continue;
        }
        i += 1;
    }
    Ok(PatchCandidate {
        id: candidate_id(text),
        diff: text.to_string(),
        touched_files: touched_files(&files),
        origin: PatchOrigin::External,
        files,
    })
}

fn mark_missing_newline(hunk: &mut Hunk) {
    match hunk.lines.last() {
        Some(HunkLine::Context(_)) => {
            hunk.old_missing_newline = true;
            hunk.new_missing_newline = true;
        }
        Some(HunkLine::Remove(_)) => hunk.old_missing_newline = true,
        Some(HunkLine::Add(_)) => hunk.new_missing_newline = true,
        None => {}
    }
}

/// Renders file patches as canonical unified diff text. New-side start lines
/// are recomputed from the old-side positions.
pub fn render_file_patches(files: &[FilePatch]) -> String {
    let mut out = String::new();
    for file in files {
        match &file.old_path {
            Some(p) => out.push_str(&format!("--- a/{p}\n")),
            None => out.push_str("--- /dev/null\n"),
        }
        match &file.new_path {
            Some(p) => out.push_str(&format!("+++ b/{p}\n")),
            None => out.push_str("+++ /dev/null\n"),
        }
        for (hunk, new_start) in file.hunks.iter().zip(file.computed_new_starts()) {
            out.push_str(&format!(
                "@@ -{},{} +{},{} @@",
                hunk.old_start, hunk.old_len, new_start, hunk.new_len
            ));
            if !hunk.section.is_empty() {
                out.push(' ');
                out.push_str(&hunk.section);
            }
            out.push('\n');
            let last_old = hunk.lines.iter().rposition(HunkLine::in_old);
            let last_new = hunk.lines.iter().rposition(HunkLine::in_new);
            for (idx, line) in hunk.lines.iter().enumerate() {
                let tag = match line {
                    HunkLine::Context(_) => ' ',
                    HunkLine::Remove(_) => '-',
                    HunkLine::Add(_) => '+',
                };
                out.push(tag);
                out.push_str(line.text());
                out.push('\n');
                let marks_old = hunk.old_missing_newline && Some(idx) == last_old;
                let marks_new = hunk.new_missing_newline && Some(idx) == last_new;
                if marks_old || marks_new {
                    out.push_str("\\ No newline at end of file\n");
                }
            }
        }
    }
    out
}
