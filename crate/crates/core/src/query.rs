//! Deterministic structural lookups over a [`StructuralIndex`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{EdgeKind, StructuralIndex, SymbolId, SymbolKind, SymbolRecord};
use crate::repo::{is_identifier, is_qualified_name, Repository};

pub const DEFAULT_HOP_LIMIT: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum QueryError {
    #[error("{0:?} is not a valid identifier or qualified name")]
    NotFound(String),
    #[error("scope {0:?} names no known symbol")]
    ScopeNotFound(String),
    #[error("{name:?} is ambiguous: {}", candidates.join(", "))]
    AmbiguousName { name: String, candidates: Vec<String> },
    #[error("no class definition named {0:?}")]
    UnknownClass(String),
    #[error("no function {function:?} in scope {class:?}")]
    UnknownFunction { class: String, function: String },
    #[error("none of the seed names matched a symbol")]
    NoSeedsResolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryMatch {
    pub symbol: SymbolRecord,
    pub snippet: String,
    pub match_rank: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InheritanceChain {
    pub focus: SymbolId,
    /// Nearest base first.
    pub ancestors: Vec<SymbolId>,
    /// Nearest derived class first.
    pub descendants: Vec<SymbolId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CallSiteLocation {
    pub path: String,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionCall {
    pub caller: SymbolId,
    /// A real symbol or an `unresolved:` sentinel.
    pub callee: SymbolId,
    pub callee_name: String,
    pub call_site: CallSiteLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefectSubgraph {
    pub seeds: Vec<SymbolId>,
    pub members: BTreeSet<SymbolId>,
    pub hop_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrepHit {
    pub path: String,
    pub line: u32,
    pub text: String,
}

/// Name matching shared by all tools: an unqualified query compares the
/// record's name; a qualified one compares the qualified name or a
/// `::`-aligned suffix of it; a leading `::` demands an exact match.
pub fn name_matches(record: &SymbolRecord, query: &str) -> bool {
    if let Some(exact) = query.strip_prefix("::") {
        return record.qualified_name == exact;
    }
    if !query.contains("::") {
        return record.name == query;
    }
    scope_suffix_matches(&record.qualified_name, query)
}

fn scope_suffix_matches(qn: &str, query: &str) -> bool {
    qn == query
        || qn
            .strip_suffix(query)
            .is_some_and(|head| head.ends_with("::"))
}

fn valid_name(name: &str) -> bool {
    let bare = name.strip_prefix("::").unwrap_or(name);
    is_identifier(bare) || is_qualified_name(bare)
}

fn to_matches<'a>(index: &StructuralIndex, records: impl IntoIterator<Item = &'a SymbolRecord>) -> Vec<QueryMatch> {
    records
        .into_iter()
        .enumerate()
        .map(|(rank, s)| QueryMatch {
            symbol: s.clone(),
            snippet: index.snippet(s),
            match_rank: rank as u32,
        })
        .collect()
}

/// Class, struct and class-template definitions matching `name`.
pub fn find_class(index: &StructuralIndex, name: &str) -> Result<Vec<QueryMatch>, QueryError> {
    if !valid_name(name) {
        return Err(QueryError::NotFound(name.to_string()));
    }
    let mut hits: Vec<&SymbolRecord> = index
        .symbols
        .iter()
        .filter(|s| s.kind.is_class_like() && s.is_definition && name_matches(s, name))
        .collect();
    hits.sort_by(|a, b| (&a.qualified_name, &a.location).cmp(&(&b.qualified_name, &b.location)));
    Ok(to_matches(index, hits))
}

fn in_scope(record: &SymbolRecord, scope: &str) -> bool {
    let s = record.scope();
    scope.is_empty() || s == scope || s.strip_prefix(scope).is_some_and(|rest| rest.starts_with("::"))
}

/// Function records named `name` anywhere below `scope` (`""` = any scope).
/// Overloads sharing a qualified name are contiguous, definitions first.
pub fn find_function(index: &StructuralIndex, scope: &str, name: &str) -> Result<Vec<QueryMatch>, QueryError> {
    let scope = scope.strip_prefix("::").unwrap_or(scope);
    if !scope.is_empty() && !index.by_qualified.contains_key(scope) {
        return Err(QueryError::ScopeNotFound(scope.to_string()));
    }
    let mut hits: Vec<&SymbolRecord> = index
        .symbols
        .iter()
        .filter(|s| s.kind.is_function() && !s.is_unresolved() && s.name == name && in_scope(s, scope))
        .collect();
    hits.sort_by(|a, b| {
        (&a.qualified_name, !a.is_definition, &a.location).cmp(&(&b.qualified_name, !b.is_definition, &b.location))
    });
    Ok(to_matches(index, hits))
}

/// Post-hoc overload narrowing: keeps matches whose normalized signature
/// equals `signature` (with or without a trailing ` const`).
pub fn filter_by_signature(matches: &[QueryMatch], signature: &str) -> Vec<QueryMatch> {
    let wanted = signature.split_whitespace().collect::<Vec<_>>().join(" ");
    matches
        .iter()
        .filter(|m| {
            let sig = &m.symbol.signature;
            *sig == wanted || sig.strip_suffix(" const") == Some(wanted.as_str())
        })
        .cloned()
        .enumerate()
        .map(|(i, mut m)| {
            m.match_rank = i as u32;
            m
        })
        .collect()
}

fn bfs_levels(index: &StructuralIndex, focus: SymbolId, adjacency: &BTreeMap<SymbolId, Vec<SymbolId>>) -> Vec<SymbolId> {
    let mut dist: BTreeMap<SymbolId, usize> = BTreeMap::from([(focus, 0)]);
    let mut queue = VecDeque::from([focus]);
    while let Some(c) = queue.pop_front() {
        let d = dist[&c];
        for &n in adjacency.get(&c).into_iter().flatten() {
            if let std::collections::btree_map::Entry::Vacant(v) = dist.entry(n) {
                v.insert(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist.remove(&focus);
    let mut out: Vec<(usize, &str, SymbolId)> = dist
        .into_iter()
        .map(|(id, d)| (d, index.symbols[id as usize].qualified_name.as_str(), id))
        .collect();
    out.sort();
    out.into_iter().map(|(_, _, id)| id).collect()
}

/// Transitive bases and derived classes of a uniquely named class.
pub fn get_inheritance_chain(index: &StructuralIndex, class_name: &str) -> Result<InheritanceChain, QueryError> {
    let candidates: Vec<&SymbolRecord> = index
        .symbols
        .iter()
        .filter(|s| s.kind.is_class_like() && s.is_definition && name_matches(s, class_name))
        .collect();
    let focus = match candidates.as_slice() {
        [] => return Err(QueryError::UnknownClass(class_name.to_string())),
        [one] => one.symbol_id,
        many => {
            let mut names: Vec<String> = many.iter().map(|s| s.label()).collect();
            names.sort();
            return Err(QueryError::AmbiguousName {
                name: class_name.to_string(),
                candidates: names,
            });
        }
    };
    let mut up: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
    let mut down: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
    for e in index.edges_of(EdgeKind::InheritsFrom) {
        up.entry(e.from).or_default().push(e.to);
        down.entry(e.to).or_default().push(e.from);
    }
    Ok(InheritanceChain {
        focus,
        ancestors: bfs_levels(index, focus, &up),
        descendants: bfs_levels(index, focus, &down),
    })
}

/// Outgoing call edges of every function named `function_name` in
/// `class_name` (`""` = any scope), ordered by call site.
pub fn get_function_calls(
    index: &StructuralIndex,
    class_name: &str,
    function_name: &str,
) -> Result<Vec<FunctionCall>, QueryError> {
    let callers: BTreeSet<SymbolId> = index
        .symbols
        .iter()
        .filter(|s| s.kind.is_function() && !s.is_unresolved() && s.name == function_name)
        .filter(|s| {
            if class_name.is_empty() {
                return true;
            }
            match class_name.strip_prefix("::") {
                Some(exact) => s.scope() == exact,
                None => scope_suffix_matches(s.scope(), class_name),
            }
        })
        .map(|s| s.symbol_id)
        .collect();
    if callers.is_empty() {
        return Err(QueryError::UnknownFunction {
            class: class_name.to_string(),
            function: function_name.to_string(),
        });
    }
    let mut out: Vec<FunctionCall> = index
        .edges_of(EdgeKind::Calls)
        .filter(|e| callers.contains(&e.from))
        .map(|e| {
            let site = e.call_site.unwrap_or(crate::index::CallSite { line: 0, column: 0 });
            FunctionCall {
                caller: e.from,
                callee: e.to,
                callee_name: index.symbols[e.to as usize].qualified_name.clone(),
                call_site: CallSiteLocation {
                    path: index.symbols[e.from as usize].location.path.clone(),
                    line: site.line,
                    column: site.column,
                },
            }
        })
        .collect();
    out.sort_by(|a, b| (&a.call_site, a.caller, a.callee).cmp(&(&b.call_site, b.caller, b.callee)));
    Ok(out)
}

/// Seeds are all symbols matching a seed name; members are everything
/// within `hop_limit` undirected hops over calls, inheritance, containment
/// and override edges.
pub fn defect_subgraph(
    index: &StructuralIndex,
    seed_names: &[String],
    hop_limit: usize,
) -> Result<DefectSubgraph, QueryError> {
    let seeds: Vec<SymbolId> = index
        .symbols
        .iter()
        .filter(|s| seed_names.iter().any(|n| !n.is_empty() && (name_matches(s, n) || s.qualified_name == *n)))
        .map(|s| s.symbol_id)
        .collect();
    if seeds.is_empty() {
        return Err(QueryError::NoSeedsResolved);
    }
    let mut adjacency: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
    for e in &index.edges {
        if matches!(
            e.kind,
            EdgeKind::Calls | EdgeKind::InheritsFrom | EdgeKind::Contains | EdgeKind::Overrides
        ) {
            adjacency.entry(e.from).or_default().push(e.to);
            adjacency.entry(e.to).or_default().push(e.from);
        }
    }
    let mut members: BTreeSet<SymbolId> = seeds.iter().copied().collect();
    let mut frontier: Vec<SymbolId> = seeds.clone();
    for _ in 0..hop_limit {
        let mut next = Vec::new();
        for c in frontier {
            for &n in adjacency.get(&c).into_iter().flatten() {
                if members.insert(n) {
                    next.push(n);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(DefectSubgraph {
        seeds,
        members,
        hop_limit,
    })
}

/// Lexical baseline: every line containing `pattern`, in file order.
pub fn grep_baseline(repo: &Repository, pattern: &str) -> Vec<GrepHit> {
    grep_sources(repo.units.iter().map(|u| (u.path.as_str(), u.content.as_str())), pattern)
}

pub fn grep_sources<'a>(files: impl IntoIterator<Item = (&'a str, &'a str)>, pattern: &str) -> Vec<GrepHit> {
    if pattern.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (path, content) in files {
        for (i, line) in content.lines().enumerate() {
            if line.contains(pattern) {
                out.push(GrepHit {
                    path: path.to_string(),
                    line: i as u32 + 1,
                    text: line.to_string(),
                });
            }
        }
    }
    out
}

/// Function-kind symbols (excluding sentinels) whose span covers `line`.
pub fn functions_at(index: &StructuralIndex, path: &str, line: u32) -> Vec<SymbolId> {
    index
        .symbols
        .iter()
        .filter(|s| {
            s.kind.is_function()
                && !s.is_unresolved()
                && s.location.path == path
                && s.location.start_line <= line
                && line <= s.location.end_line
        })
        .map(|s| s.symbol_id)
        .collect()
}

/// The innermost non-namespace symbols whose span covers `line`.
pub fn innermost_at(index: &StructuralIndex, path: &str, line: u32) -> Vec<SymbolId> {
    let covering: Vec<&SymbolRecord> = index
        .symbols
        .iter()
        .filter(|s| {
            s.kind != SymbolKind::Namespace
                && s.location.path == path
                && s.location.start_line <= line
                && line <= s.location.end_line
        })
        .collect();
    let Some(best) = covering
        .iter()
        .map(|s| s.location.end_line - s.location.start_line)
        .min()
    else {
        return Vec::new();
    };
    covering
        .into_iter()
        .filter(|s| s.location.end_line - s.location.start_line == best)
        .map(|s| s.symbol_id)
        .collect()
}
