//! Slow, obviously-correct reference computations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// Bucketed word counts for the offline hashing embedder: lowercased ASCII
/// alphanumeric runs, FNV-1a 64 modulo 256.
pub fn hashing_counts(text: &str) -> BTreeMap<usize, u64> {
    let mut counts = BTreeMap::new();
    let mut word = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_ascii_alphanumeric() {
            word.push(ch.to_ascii_lowercase());
        } else if !word.is_empty() {
            let mut h: u64 = 14695981039346656037;
            for b in word.bytes() {
                h = (h ^ b as u64).wrapping_mul(1099511628211);
            }
            *counts.entry((h % 256) as usize).or_insert(0) += 1;
            word.clear();
        }
    }
    counts
}

/// The embedding itself, or `None` for text without words.
pub fn hashing_embed(text: &str) -> Option<Vec<f64>> {
    let counts = hashing_counts(text);
    let max = *counts.values().max()? as f64;
    let mut v = vec![0.0; 256];
    for (b, c) in counts {
        v[b] = c as f64 / max;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Some(v.into_iter().map(|x| x / norm).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>().clamp(-1.0, 1.0)
}

/// Every `(score, label)` against `query`, best first; ties by label.
pub fn scan_scores(query: &[f64], entries: &[(String, Vec<f64>)]) -> Vec<(f64, String)> {
    let mut all: Vec<(f64, String)> = entries.iter().map(|(l, v)| (dot(query, v), l.clone())).collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    all
}

/// Hop distances from `start` following directed `edges`.
pub fn shortest_hops(n: usize, edges: &[(u32, u32)], start: u32) -> Vec<Option<usize>> {
    let mut dist = vec![None; n];
    dist[start as usize] = Some(0);
    // Bellman-Ford style relaxation; quadratic but independent of any queue.
    loop {
        let mut changed = false;
        for &(a, b) in edges {
            if let Some(d) = dist[a as usize] {
                let cand = d + 1;
                if dist[b as usize].map_or(true, |x| cand < x) {
                    dist[b as usize] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// Nodes within `k` undirected hops of any seed.
pub fn k_hop_closure(edges: &[(u32, u32)], seeds: &BTreeSet<u32>, k: usize) -> BTreeSet<u32> {
    let mut reached = seeds.clone();
    for _ in 0..k {
        let mut next = reached.clone();
        for &(a, b) in edges {
            if reached.contains(&a) {
                next.insert(b);
            }
            if reached.contains(&b) {
                next.insert(a);
            }
        }
        if next == reached {
            break;
        }
        reached = next;
    }
    reached
}

/// Ancestors of every node in a parent-list DAG, by BFS per node.
pub fn ancestors(parents: &[Vec<usize>]) -> Vec<BTreeMap<usize, usize>> {
    (0..parents.len())
        .map(|i| {
            let mut seen = BTreeMap::new();
            let mut q = VecDeque::from([(i, 0usize)]);
            while let Some((x, d)) = q.pop_front() {
                for &p in &parents[x] {
                    if !seen.contains_key(&p) {
                        seen.insert(p, d + 1);
                        q.push_back((p, d + 1));
                    }
                }
            }
            seen
        })
        .collect()
}

/// Changed non-blank lines plus ten per file, read straight off diff text.
pub fn diff_complexity(diff: &str) -> usize {
    let mut n = 0;
    for line in diff.lines() {
        if line.starts_with("+++ ") {
            n += 10;
        } else if line.starts_with("--- ") {
            continue;
        } else if let Some(rest) = line.strip_prefix('+').or_else(|| line.strip_prefix('-')) {
            if !rest.trim().is_empty() {
                n += 1;
            }
        }
    }
    n
}

pub fn intersect<T: Ord + Clone>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> BTreeSet<T> {
    a.iter().filter(|x| b.contains(x)).cloned().collect()
}
