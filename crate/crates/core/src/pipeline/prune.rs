//! Behavior-relevant normal form of candidate patches.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::repo::{render_file_patches, FilePatch, Hunk, HunkLine, PatchCandidate, PatchOrigin};

/// Identity of one surviving hunk after normalization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HunkKey {
    pub path: String,
    /// Old-file line of the first change (insertion anchor for additions).
    pub first_change: usize,
    pub before: Vec<String>,
    pub after: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedPatch {
    /// Id of the candidate this was derived from.
    pub source: String,
    /// The surviving hunks, rendered verbatim.
    pub normalized_diff: String,
    pub is_behavioral: bool,
    pub files: Vec<FilePatch>,
    pub keys: Vec<HunkKey>,
}

impl NormalizedPatch {
    /// The surviving hunks as an applicable candidate.
    pub fn to_candidate(&self) -> PatchCandidate {
        PatchCandidate::from_file_patches(self.files.clone(), PatchOrigin::Agent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lex {
    Code,
    Block,
}

/// Strips `//` and `/* */` comments from one line, honoring string and
/// character literals. `state` carries an open block comment across lines.
fn strip_comments(line: &str, state: &mut Lex) -> String {
    let chars: Vec<char> = line.chars().collect();
    let mut out = String::with_capacity(line.len());
    let mut i = 0;
    let mut quote: Option<char> = None;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if *state == Lex::Block {
            if c == '*' && next == Some('/') {
                *state = Lex::Code;
                out.push(' ');
                i += 2;
            } else {
                i += 1;
            }
            continue;
        }
        if let Some(q) = quote {
            out.push(c);
            if c == '\\' {
                if let Some(n) = next {
                    out.push(n);
                }
                i += 2;
                continue;
            }
            if c == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match (c, next) {
            ('/', Some('/')) => break,
            ('/', Some('*')) => {
                *state = Lex::Block;
                i += 2;
            }
            ('"', _) | ('\'', _) => {
                quote = Some(c);
                out.push(c);
                i += 1;
            }
            _ => {
                out.push(c);
                i += 1;
            }
        }
    }
    out
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized changed lines of one side of a hunk. Context lines only feed
/// the block-comment state.
fn normalized_side(hunk: &Hunk, old_side: bool) -> Vec<String> {
    let mut state = Lex::Code;
    let mut out = Vec::new();
    for line in &hunk.lines {
        let on_side = if old_side { line.in_old() } else { line.in_new() };
        if !on_side {
            continue;
        }
        let text = collapse_ws(&strip_comments(line.text(), &mut state));
        if line.is_change() && !text.is_empty() {
            out.push(text);
        }
    }
    out
}

fn first_change(hunk: &Hunk) -> usize {
    hunk.changed_old_lines().first().copied().unwrap_or(hunk.old_begin())
}

/// Normal form of one candidate: comment-only and whitespace-only hunks
/// are dropped, surviving hunks are kept verbatim.
pub fn normalize(candidate: &PatchCandidate) -> NormalizedPatch {
    let mut files = Vec::new();
    let mut keys = Vec::new();
    for file in &candidate.files {
        let path = file.path().to_string();
        if file.hunks.is_empty() {
            // creation/deletion/rename without content changes
            keys.push(HunkKey {
                path: format!("{:?}->{:?}", file.old_path, file.new_path),
                first_change: 0,
                before: Vec::new(),
                after: Vec::new(),
            });
            files.push(file.clone());
            continue;
        }
        let mut kept = Vec::new();
        for hunk in &file.hunks {
            let before = normalized_side(hunk, true);
            let after = normalized_side(hunk, false);
            if before != after {
                keys.push(HunkKey {
                    path: path.clone(),
                    first_change: first_change(hunk),
                    before,
                    after,
                });
                kept.push(hunk.clone());
            }
        }
        if !kept.is_empty() {
            files.push(FilePatch {
                old_path: file.old_path.clone(),
                new_path: file.new_path.clone(),
                hunks: kept,
            });
        }
    }
    NormalizedPatch {
        source: candidate.id.clone(),
        normalized_diff: render_file_patches(&files),
        is_behavioral: !files.is_empty(),
        files,
        keys,
    }
}

/// Non-blank changed lines plus ten per touched file.
pub fn complexity(patch: &NormalizedPatch) -> u64 {
    let lines: usize = patch
        .files
        .iter()
        .flat_map(|f| &f.hunks)
        .flat_map(|h| &h.lines)
        .filter(|l| matches!(l, HunkLine::Add(_) | HunkLine::Remove(_)) && !l.text().trim().is_empty())
        .count();
    lines as u64 + 10 * patch.files.len() as u64
}

/// Normalizes, drops non-behavioral candidates and merges candidates with
/// equal normal forms. Each group is represented by its least complex member
/// (then smallest source id); output is ordered by normalized diff text.
pub fn prune(candidates: &[PatchCandidate]) -> Vec<NormalizedPatch> {
    let mut groups: BTreeMap<Vec<HunkKey>, NormalizedPatch> = BTreeMap::new();
    for c in candidates {
        let n = normalize(c);
        if !n.is_behavioral {
            continue;
        }
        match groups.get_mut(&n.keys) {
            Some(best) => {
                if (complexity(&n), &n.source) < (complexity(best), &best.source) {
                    *best = n;
                }
            }
            None => {
                groups.insert(n.keys.clone(), n);
            }
        }
    }
    let mut out: Vec<NormalizedPatch> = groups.into_values().collect();
    out.sort_by(|a, b| (&a.normalized_diff, &a.source).cmp(&(&b.normalized_diff, &b.source)));
    out
}
