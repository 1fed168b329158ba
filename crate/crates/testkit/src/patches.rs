//! Random base files and candidate diffs with known behavioral content.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;

pub const PATH: &str = "src/state.cpp";

/// A file of assignments `x{i} = {v};` interleaved with comment lines.
pub fn base_file<R: Rng + ?Sized>(rng: &mut R) -> Vec<String> {
    let n = rng.gen_range(4..=12);
    (0..n)
        .map(|i| {
            if rng.gen_bool(0.2) {
                format!("    // note {i}")
            } else {
                format!("    x{i} = {};", rng.gen_range(0..4))
            }
        })
        .collect()
}

pub fn render(lines: &[String]) -> String {
    let mut s = lines.join("\n");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    /// Replaces the assigned value.
    Value(u32),
    Reindent,
    TrailingComment,
    /// Inserts a comment line after the edited one.
    InsertComment,
}

#[derive(Debug, Clone)]
pub struct CandidateDiff {
    pub diff: String,
    /// File content after applying the diff.
    pub patched: Vec<String>,
    /// `(line index, new value)` of every value change; two candidates
    /// are behaviorally equal exactly when these sets match.
    pub behavior: BTreeSet<(usize, u32)>,
}

fn value_of(line: &str) -> Option<u32> {
    line.trim().strip_suffix(';')?.split(" = ").nth(1)?.parse().ok()
}

/// One to three edits on distinct lines, each in its own zero-context hunk.
pub fn candidate<R: Rng + ?Sized>(rng: &mut R, base: &[String]) -> CandidateDiff {
    let k = rng.gen_range(1..=3.min(base.len()));
    let mut lines: Vec<usize> = sample(rng, base.len(), k).into_vec();
    lines.sort_unstable();
    let mut diff = format!("--- a/{PATH}\n+++ b/{PATH}\n");
    let mut patched = Vec::new();
    let mut behavior = BTreeSet::new();
    let mut offset: isize = 0;
    let mut next = 0;
    for i in lines {
        patched.extend_from_slice(&base[next..i]);
        next = i + 1;
        let old = &base[i];
        let edit = match value_of(old) {
            Some(v) if rng.gen_bool(0.5) => Edit::Value((v + rng.gen_range(1..=3)) % 4),
            _ => match rng.gen_range(0..3) {
                0 => Edit::Reindent,
                1 => Edit::TrailingComment,
                _ => Edit::InsertComment,
            },
        };
        let new: Vec<String> = match edit {
            Edit::Value(v) => {
                behavior.insert((i, v));
                let name = old.trim().split(" = ").next().unwrap_or("x");
                vec![format!("    {name} = {v};")]
            }
            Edit::Reindent => vec![format!("        {}", old.trim())],
            Edit::TrailingComment => vec![format!("{old} // why")],
            Edit::InsertComment => vec![old.clone(), "    // added".to_string()],
        };
        let new_start = i as isize + 1 + offset;
        diff.push_str(&format!("@@ -{},1 +{},{} @@\n-{old}\n", i + 1, new_start, new.len()));
        for l in &new {
            diff.push_str(&format!("+{l}\n"));
        }
        offset += new.len() as isize - 1;
        patched.extend(new);
    }
    patched.extend_from_slice(&base[next..]);
    CandidateDiff {
        diff,
        patched,
        behavior,
    }
}
