//! Code-intent index: template summaries of files, classes and functions,
//! embedded and searched by cosine similarity, and the intersection of intent
//! hits with the structural defect subgraph.

mod embed;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{
    cosine, normalize, parse_vector, word_tokens, CommandProvider, EmbedError, EmbeddingProvider, HashingProvider,
    HASHING_DIMENSION, HASHING_PROVIDER_ID,
};

use crate::index::{EdgeKind, StructuralIndex, SymbolId, SymbolRecord, UNRESOLVED_PREFIX};
use crate::par::{self, Execution};
use crate::query::{defect_subgraph, DefectSubgraph};
use crate::repo::{IssueDescription, Repository};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    File,
    Class,
    Function,
}

impl Granularity {
    pub fn all() -> BTreeSet<Granularity> {
        BTreeSet::from([Granularity::File, Granularity::Class, Granularity::Function])
    }
}

impl std::str::FromStr for Granularity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "file" => Ok(Granularity::File),
            "class" => Ok(Granularity::Class),
            "function" => Ok(Granularity::Function),
            other => Err(format!("unknown granularity {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactId {
    Symbol(SymbolId),
    File(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDoc {
    pub artifact_id: ArtifactId,
    pub granularity: Granularity,
    pub summary: String,
    pub vector: Vec<f64>,
    /// Qualified name (symbols) or path (files); orders equal scores.
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentIndex {
    pub docs: Vec<IntentDoc>,
    pub dimension: usize,
    pub provider_id: String,
    pub repo_snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentHit {
    pub artifact_id: ArtifactId,
    pub score: f64,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackPolicy {
    #[default]
    IntentOnly,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub intent_hits: Vec<IntentHit>,
    pub subgraph: DefectSubgraph,
    pub intersection: BTreeSet<SymbolId>,
    pub fallback_used: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntentError {
    #[error("unknown artifact {0:?}")]
    UnknownArtifact(ArtifactId),
    #[error("structural index snapshot {index} does not match repository snapshot {repo}")]
    SnapshotMismatch { index: String, repo: String },
    #[error("intent index is empty")]
    EmptyIndex,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("intent index was built with provider {index:?}, queried with {query:?}")]
    ProviderMismatch { index: String, query: String },
    #[error("vector dimension {found} differs from {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

fn display_name(s: &SymbolRecord) -> &str {
    s.qualified_name.strip_prefix(UNRESOLVED_PREFIX).unwrap_or(&s.qualified_name)
}

fn join_sorted(names: BTreeSet<&str>) -> String {
    names.into_iter().collect::<Vec<_>>().join(", ")
}

/// Deterministic template summary of one symbol.
pub fn summarize_artifact(index: &StructuralIndex, id: SymbolId) -> Result<String, IntentError> {
    let s = index
        .symbol(id)
        .ok_or(IntentError::UnknownArtifact(ArtifactId::Symbol(id)))?;
    let mut out = format!("{} {}{}", s.kind.as_str().replace('_', " "), s.qualified_name, s.signature);
    let scope = s.scope();
    if scope.is_empty() {
        out.push_str("\nin global scope");
    } else {
        out.push_str(&format!("\nin {scope}"));
    }
    let members: BTreeSet<&str> = index
        .edges_of(EdgeKind::Contains)
        .filter(|e| e.from == id)
        .map(|e| index.symbols[e.to as usize].name.as_str())
        .collect();
    if !members.is_empty() {
        out.push_str(&format!("\nmembers: {}", join_sorted(members)));
    }
    let callees: BTreeSet<&str> = index
        .edges_of(EdgeKind::Calls)
        .filter(|e| e.from == id)
        .map(|e| display_name(&index.symbols[e.to as usize]))
        .collect();
    if !callees.is_empty() {
        out.push_str(&format!("\ncalls: {}", join_sorted(callees)));
    }
    if !s.bases.is_empty() {
        out.push_str(&format!("\nbases: {}", s.bases.join(", ")));
    }
    if !s.leading_comment.is_empty() {
        out.push_str(&format!("\ncomment: {}", s.leading_comment));
    }
    Ok(out)
}

/// File summary: the path followed by the summaries of its top-level symbols.
pub fn summarize_file(index: &StructuralIndex, path: &str) -> Result<String, IntentError> {
    if !index.files.iter().any(|f| f.path == path) {
        return Err(IntentError::UnknownArtifact(ArtifactId::File(path.to_string())));
    }
    let nested: BTreeSet<SymbolId> = index.edges_of(EdgeKind::Contains).map(|e| e.to).collect();
    let mut out = format!("file {path}");
    for s in &index.symbols {
        if s.location.path == path && !nested.contains(&s.symbol_id) {
            out.push('\n');
            out.push_str(&summarize_artifact(index, s.symbol_id)?);
        }
    }
    Ok(out)
}

/// The artifacts indexed at each granularity, in a fixed order.
pub fn artifacts(index: &StructuralIndex, granularities: &BTreeSet<Granularity>) -> Vec<(ArtifactId, Granularity)> {
    let mut out = Vec::new();
    if granularities.contains(&Granularity::File) {
        out.extend(index.files.iter().map(|f| (ArtifactId::File(f.path.clone()), Granularity::File)));
    }
    for s in &index.symbols {
        if s.is_unresolved() {
            continue;
        }
        if granularities.contains(&Granularity::Class) && s.kind.is_class_like() && s.is_definition {
            out.push((ArtifactId::Symbol(s.symbol_id), Granularity::Class));
        }
        if granularities.contains(&Granularity::Function) && s.kind.is_function() {
            out.push((ArtifactId::Symbol(s.symbol_id), Granularity::Function));
        }
    }
    out
}

pub fn build_intent_index(
    repo: &Repository,
    sidx: &StructuralIndex,
    provider: &dyn EmbeddingProvider,
    granularities: &BTreeSet<Granularity>,
) -> Result<IntentIndex, IntentError> {
    build_intent_index_with(repo, sidx, provider, granularities, Execution::default())
}

pub fn build_intent_index_with(
    repo: &Repository,
    sidx: &StructuralIndex,
    provider: &dyn EmbeddingProvider,
    granularities: &BTreeSet<Granularity>,
    exec: Execution,
) -> Result<IntentIndex, IntentError> {
    if sidx.repo_snapshot != repo.snapshot_id {
        return Err(IntentError::SnapshotMismatch {
            index: sidx.repo_snapshot.clone(),
            repo: repo.snapshot_id.clone(),
        });
    }
    let items = artifacts(sidx, granularities);
    let docs: Vec<Result<IntentDoc, IntentError>> = par::map(exec, &items, |(id, g)| {
        let (summary, label) = match id {
            ArtifactId::Symbol(s) => (summarize_artifact(sidx, *s)?, sidx.symbols[*s as usize].label()),
            ArtifactId::File(p) => (summarize_file(sidx, p)?, p.clone()),
        };
        let vector = provider.embed(&summary)?;
        Ok(IntentDoc {
            artifact_id: id.clone(),
            granularity: *g,
            summary,
            vector,
            label,
        })
    });
    let docs: Vec<IntentDoc> = docs.into_iter().collect::<Result<_, _>>()?;
    let dimension = docs.first().map_or(0, |d| d.vector.len());
    if let Some(d) = docs.iter().find(|d| d.vector.len() != dimension) {
        return Err(IntentError::DimensionMismatch {
            expected: dimension,
            found: d.vector.len(),
        });
    }
    Ok(IntentIndex {
        docs,
        dimension,
        provider_id: provider.id().to_string(),
        repo_snapshot: sidx.repo_snapshot.clone(),
    })
}

/// Top-`k` documents by cosine similarity to `q`; equal scores are ordered
/// by label.
pub fn query_code_intent(
    iidx: &IntentIndex,
    provider: &dyn EmbeddingProvider,
    q: &str,
    k: usize,
) -> Result<Vec<IntentHit>, IntentError> {
    if k == 0 {
        return Err(IntentError::InvalidK);
    }
    if iidx.docs.is_empty() {
        return Err(IntentError::EmptyIndex);
    }
    if provider.id() != iidx.provider_id {
        return Err(IntentError::ProviderMismatch {
            index: iidx.provider_id.clone(),
            query: provider.id().to_string(),
        });
    }
    let qv = provider.embed(q)?;
    if qv.len() != iidx.dimension {
        return Err(IntentError::DimensionMismatch {
            expected: iidx.dimension,
            found: qv.len(),
        });
    }
    let mut hits: Vec<IntentHit> = iidx
        .docs
        .iter()
        .map(|d| IntentHit {
            artifact_id: d.artifact_id.clone(),
            score: cosine(&qv, &d.vector),
            label: d.label.clone(),
        })
        .collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.label.cmp(&b.label)));
    hits.truncate(k);
    Ok(hits)
}

/// Symbols named by the hits; file hits expand to every symbol in the file.
pub fn hit_symbols(sidx: &StructuralIndex, hits: &[IntentHit]) -> BTreeSet<SymbolId> {
    let mut out = BTreeSet::new();
    for h in hits {
        match &h.artifact_id {
            ArtifactId::Symbol(id) => {
                out.insert(*id);
            }
            ArtifactId::File(p) => {
                out.extend(sidx.symbols.iter().filter(|s| s.location.path == *p).map(|s| s.symbol_id));
            }
        }
    }
    out
}

/// Intersects intent hits with the defect subgraph.
pub fn localize(
    sidx: &StructuralIndex,
    intent_hits: Vec<IntentHit>,
    subgraph: DefectSubgraph,
    fallback_policy: FallbackPolicy,
) -> LocalizationResult {
    let hit_set = hit_symbols(sidx, &intent_hits);
    let intersection: BTreeSet<SymbolId> = hit_set.intersection(&subgraph.members).copied().collect();
    let (intersection, fallback_used) = if intersection.is_empty() && fallback_policy == FallbackPolicy::IntentOnly {
        (hit_set, true)
    } else {
        (intersection, false)
    };
    LocalizationResult {
        intent_hits,
        subgraph,
        intersection,
        fallback_used,
    }
}

/// Full localization for an issue: intent query over the issue text, seed
/// subgraph from the symbols it mentions, then [`localize`]. Unmatched seeds
/// give an empty subgraph rather than an error.
pub fn localize_issue(
    sidx: &StructuralIndex,
    iidx: &IntentIndex,
    provider: &dyn EmbeddingProvider,
    issue: &IssueDescription,
    k: usize,
    hop_limit: usize,
    policy: FallbackPolicy,
) -> Result<LocalizationResult, IntentError> {
    let hits = match query_code_intent(iidx, provider, &issue.full_text(), k) {
        Ok(h) => h,
        Err(IntentError::EmptyIndex) | Err(IntentError::Embed(EmbedError::EmptyText)) => Vec::new(),
        Err(e) => return Err(e),
    };
    let subgraph = defect_subgraph(sidx, &issue.mentioned_symbols, hop_limit).unwrap_or(DefectSubgraph {
        seeds: Vec::new(),
        members: BTreeSet::new(),
        hop_limit,
    });
    Ok(localize(sidx, hits, subgraph, policy))
}

/// Document counts per granularity.
pub fn doc_counts(iidx: &IntentIndex) -> BTreeMap<Granularity, usize> {
    let mut out = BTreeMap::new();
    for d in &iidx.docs {
        *out.entry(d.granularity).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;

    fn corpus() -> Repository {
        Repository::from_files(
            "/m",
            [
                ("search_utils.h", "// helper\ninline void Search(const std::string& query) { (void)query; }\n"),
                ("search_class.h", "class SearchManager;\n// Search engine.\nclass Search {\npublic:\n    explicit Search(const std::string& path);\n    void run(const std::string& query);\n};\n"),
                ("main.cpp", "int main() {\n    class Search engine(\"index.db\");\n    Search(\"hello\");\n    return 0;\n}\n"),
                ("json.h", "// Converts records to JSON for data serialization.\nclass JsonSerializer { public: std::string dump(); };\n"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn summaries() {
        let repo = corpus();
        let idx = build_index(&repo);
        let class = idx.symbols.iter().find(|s| s.name == "Search" && s.kind.is_class_like()).unwrap();
        let text = summarize_artifact(&idx, class.symbol_id).unwrap();
        assert!(text.starts_with("class Search"));
        assert!(text.contains("run"));
        assert!(text.contains("comment: Search engine."));
        assert_eq!(summarize_artifact(&idx, class.symbol_id).unwrap(), text);
        assert!(matches!(summarize_artifact(&idx, 9999), Err(IntentError::UnknownArtifact(_))));
    }

    #[test]
    fn build_and_query() {
        let repo = corpus();
        let idx = build_index(&repo);
        let p = HashingProvider;
        let g = BTreeSet::from([Granularity::Class, Granularity::Function]);
        let ii = build_intent_index(&repo, &idx, &p, &g).unwrap();
        assert!(ii.docs.len() >= 4);
        for d in &ii.docs {
            let n: f64 = d.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
        let hits = query_code_intent(&ii, &p, "locate components responsible for data serialization", 3).unwrap();
        assert!(hits.iter().any(|h| h.label.starts_with("JsonSerializer@")));
        let first = &ii.docs[0];
        let top = query_code_intent(&ii, &p, &first.summary, 1).unwrap();
        assert!((top[0].score - 1.0).abs() < 1e-6);
        assert_eq!(query_code_intent(&ii, &p, "x", 0), Err(IntentError::InvalidK));
        let all = build_intent_index_with(&repo, &idx, &p, &Granularity::all(), Execution::Sequential).unwrap();
        assert_eq!(doc_counts(&all)[&Granularity::File], 4);
    }

    #[test]
    fn empty_and_mismatch() {
        let repo = Repository::from_files("/", Vec::<(String, String)>::new()).unwrap();
        let idx = build_index(&repo);
        let ii = build_intent_index(&repo, &idx, &HashingProvider, &Granularity::all()).unwrap();
        assert!(ii.docs.is_empty());
        assert_eq!(query_code_intent(&ii, &HashingProvider, "x", 1), Err(IntentError::EmptyIndex));
        let other = corpus();
        assert!(matches!(
            build_intent_index(&other, &idx, &HashingProvider, &Granularity::all()),
            Err(IntentError::SnapshotMismatch { .. })
        ));
    }

    #[test]
    fn localize_policies() {
        let repo = corpus();
        let idx = build_index(&repo);
        let hit = |id| IntentHit {
            artifact_id: ArtifactId::Symbol(id),
            score: 0.5,
            label: String::new(),
        };
        let sub = |m: &[SymbolId]| DefectSubgraph {
            seeds: m.to_vec(),
            members: m.iter().copied().collect(),
            hop_limit: 0,
        };
        let r = localize(&idx, vec![hit(0)], sub(&[1]), FallbackPolicy::Empty);
        assert!(r.intersection.is_empty() && !r.fallback_used);
        let r = localize(&idx, vec![hit(0)], sub(&[1]), FallbackPolicy::IntentOnly);
        assert_eq!(r.intersection, BTreeSet::from([0]));
        assert!(r.fallback_used);
        let r = localize(&idx, vec![hit(0), hit(1)], sub(&[0, 1, 2]), FallbackPolicy::Empty);
        assert_eq!(r.intersection, BTreeSet::from([0, 1]));
    }
}
