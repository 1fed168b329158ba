//! The structural symbol graph: one record per supported declaration and
//! typed edges for containment, inheritance, calls, overloads and overrides.

mod persist;
mod resolve;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cpp::{parse_source, ParsedUnit};
use crate::par::{self, Execution};
use crate::repo::{Repository, SourceUnit};

pub use persist::{
    check_fresh, load_container, load_index, persist_container, persist_index, IndexContainer,
    PersistError, FORMAT_VERSION, MAGIC,
};

pub type SymbolId = u32;

/// Prefix of the synthetic records standing in for unresolved call targets.
pub const UNRESOLVED_PREFIX: &str = "unresolved:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Namespace,
    Class,
    Struct,
    Enum,
    FreeFunction,
    MemberFunction,
    Constructor,
    Variable,
    TemplateClass,
    TemplateFunction,
    ForwardDeclaration,
}

impl SymbolKind {
    pub const ALL: [SymbolKind; 11] = [
        SymbolKind::Namespace,
        SymbolKind::Class,
        SymbolKind::Struct,
        SymbolKind::Enum,
        SymbolKind::FreeFunction,
        SymbolKind::MemberFunction,
        SymbolKind::Constructor,
        SymbolKind::Variable,
        SymbolKind::TemplateClass,
        SymbolKind::TemplateFunction,
        SymbolKind::ForwardDeclaration,
    ];

    pub fn is_function(self) -> bool {
        matches!(
            self,
            SymbolKind::FreeFunction
                | SymbolKind::MemberFunction
                | SymbolKind::Constructor
                | SymbolKind::TemplateFunction
        )
    }

    pub fn is_class_like(self) -> bool {
        matches!(self, SymbolKind::Class | SymbolKind::Struct | SymbolKind::TemplateClass)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SymbolKind::Namespace => "namespace",
            SymbolKind::Class => "class",
            SymbolKind::Struct => "struct",
            SymbolKind::Enum => "enum",
            SymbolKind::FreeFunction => "free_function",
            SymbolKind::MemberFunction => "member_function",
            SymbolKind::Constructor => "constructor",
            SymbolKind::Variable => "variable",
            SymbolKind::TemplateClass => "template_class",
            SymbolKind::TemplateFunction => "template_function",
            SymbolKind::ForwardDeclaration => "forward_declaration",
        }
    }
}

impl std::fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub path: String,
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolRecord {
    pub symbol_id: SymbolId,
    pub kind: SymbolKind,
    pub name: String,
    pub qualified_name: String,
    /// Normalized parameter list for functions, empty otherwise.
    pub signature: String,
    pub location: Location,
    pub is_definition: bool,
    pub template_params: String,
    pub is_virtual: bool,
    pub is_override: bool,
    /// Base-specifier names as written.
    pub bases: Vec<String>,
    /// Comment block directly above the declaration.
    pub leading_comment: String,
}

impl SymbolRecord {
    /// Qualified name of the enclosing scope (`""` at global scope).
    pub fn scope(&self) -> &str {
        let qn = &self.qualified_name;
        if self.is_unresolved() {
            return "";
        }
        qn.strip_suffix(self.name.as_str())
            .and_then(|s| s.strip_suffix("::"))
            .unwrap_or("")
    }

    pub fn is_unresolved(&self) -> bool {
        self.name.starts_with(UNRESOLVED_PREFIX)
    }

    /// Display label used for deterministic tie-breaks.
    pub fn label(&self) -> String {
        format!(
            "{}{}@{}:{}",
            self.qualified_name, self.signature, self.location.path, self.location.start_line
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Contains,
    InheritsFrom,
    Calls,
    OverloadOf,
    Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallSite {
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StructuralEdge {
    pub kind: EdgeKind,
    pub from: SymbolId,
    pub to: SymbolId,
    /// Position of the call expression in the caller's file (calls only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub call_site: Option<CallSite>,
}

impl StructuralEdge {
    pub fn new(kind: EdgeKind, from: SymbolId, to: SymbolId) -> StructuralEdge {
        StructuralEdge {
            kind,
            from,
            to,
            call_site: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileInfo {
    pub path: String,
    pub includes: Vec<String>,
    pub parse_errors: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralIndex {
    /// Indexed by `symbol_id`.
    pub symbols: Vec<SymbolRecord>,
    /// Sorted and free of duplicates.
    pub edges: Vec<StructuralEdge>,
    pub files: Vec<FileInfo>,
    /// Content of every unit of the indexed snapshot, for snippets and
    /// lexical search.
    pub sources: BTreeMap<String, String>,
    pub repo_snapshot: String,
    #[serde(skip)]
    pub by_name: BTreeMap<String, Vec<SymbolId>>,
    #[serde(skip)]
    pub by_qualified: BTreeMap<String, Vec<SymbolId>>,
}

impl StructuralIndex {
    pub fn symbol(&self, id: SymbolId) -> Option<&SymbolRecord> {
        self.symbols.get(id as usize)
    }

    /// Rebuilds the name lookup tables from `symbols`.
    pub fn rebuild_maps(&mut self) {
        self.by_name.clear();
        self.by_qualified.clear();
        for s in &self.symbols {
            self.by_name.entry(s.name.clone()).or_default().push(s.symbol_id);
            self.by_qualified
                .entry(s.qualified_name.clone())
                .or_default()
                .push(s.symbol_id);
        }
    }

    pub fn parse_error_total(&self) -> usize {
        self.files.iter().map(|f| f.parse_errors).sum()
    }

    /// Source lines `start..=end` of the symbol; empty for synthetic records.
    pub fn snippet(&self, record: &SymbolRecord) -> String {
        let Some(src) = self.sources.get(&record.location.path) else {
            return String::new();
        };
        let start = record.location.start_line.max(1) as usize;
        let end = record.location.end_line as usize;
        src.lines()
            .skip(start - 1)
            .take(end.saturating_sub(start) + 1)
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &StructuralEdge> {
        let lo = self.edges.partition_point(|e| e.kind < kind);
        let hi = self.edges.partition_point(|e| e.kind <= kind);
        self.edges[lo..hi].iter()
    }

    /// Structural self-check: ids match positions, edges are closed and
    /// sorted, containment is a forest and the lookup maps agree.
    pub fn check_consistency(&self) -> Result<(), String> {
        for (i, s) in self.symbols.iter().enumerate() {
            if s.symbol_id as usize != i {
                return Err(format!("symbol at {i} has id {}", s.symbol_id));
            }
            if !s.qualified_name.ends_with(&s.name) {
                return Err(format!("{} does not end with {}", s.qualified_name, s.name));
            }
            if s.location.start_line > s.location.end_line {
                return Err(format!("{} has an inverted span", s.qualified_name));
            }
            if s.kind == SymbolKind::ForwardDeclaration && s.is_definition {
                return Err(format!("forward declaration {} marked as definition", s.qualified_name));
            }
        }
        let n = self.symbols.len() as SymbolId;
        if let Some(e) = self.edges.iter().find(|e| e.from >= n || e.to >= n) {
            return Err(format!("dangling edge {e:?}"));
        }
        if self.edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err("edges not strictly sorted".into());
        }
        let mut parent: Vec<Option<SymbolId>> = vec![None; self.symbols.len()];
        for e in self.edges_of(EdgeKind::Contains) {
            if parent[e.to as usize].replace(e.from).is_some() {
                return Err(format!("symbol {} has two containers", e.to));
            }
        }
        for start in 0..self.symbols.len() {
            let mut cur = parent[start];
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if p as usize == start || steps > self.symbols.len() {
                    return Err(format!("containment cycle through {start}"));
                }
                cur = parent[p as usize];
            }
        }
        let mut copy = self.clone();
        copy.rebuild_maps();
        if copy.by_name != self.by_name || copy.by_qualified != self.by_qualified {
            return Err("lookup maps out of date".into());
        }
        Ok(())
    }
}

/// Parses one unit into records with file-local ids (`0..n`) and the
/// containment edges between them. Call and inheritance targets are only
/// resolved by [`build_index`].
pub fn parse_unit(unit: &SourceUnit) -> (Vec<SymbolRecord>, Vec<StructuralEdge>) {
    if !unit.kind.is_code() {
        return (Vec::new(), Vec::new());
    }
    let parsed = parse_source(&unit.path, &unit.content);
    let records = to_records(&unit.path, &parsed, 0);
    let mut edges: Vec<StructuralEdge> = parsed
        .symbols
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            s.parent
                .map(|p| StructuralEdge::new(EdgeKind::Contains, p as SymbolId, i as SymbolId))
        })
        .collect();
    edges.sort();
    (records, edges)
}

fn to_records(path: &str, parsed: &ParsedUnit, offset: SymbolId) -> Vec<SymbolRecord> {
    parsed
        .symbols
        .iter()
        .enumerate()
        .map(|(i, s)| SymbolRecord {
            symbol_id: offset + i as SymbolId,
            kind: s.kind,
            name: s.name.clone(),
            qualified_name: s.qualified_name.clone(),
            signature: s.signature.clone(),
            location: Location {
                path: path.to_string(),
                start_line: s.start_line,
                end_line: s.end_line,
            },
            is_definition: s.is_definition,
            template_params: s.template_params.clone(),
            is_virtual: s.is_virtual,
            is_override: s.is_override,
            bases: s.bases.clone(),
            leading_comment: s.leading_comment.clone(),
        })
        .collect()
}

pub fn build_index(repo: &Repository) -> StructuralIndex {
    build_index_with(repo, Execution::default())
}

/// Builds the index, parsing files with the given execution strategy. The
/// result does not depend on `exec`.
pub fn build_index_with(repo: &Repository, exec: Execution) -> StructuralIndex {
    let code: Vec<&SourceUnit> = repo.units.iter().filter(|u| u.kind.is_code()).collect();
    let parsed: Vec<ParsedUnit> = par::map(exec, &code, |u| parse_source(&u.path, &u.content));

    let mut symbols: Vec<SymbolRecord> = Vec::new();
    let mut edges: Vec<StructuralEdge> = Vec::new();
    let mut files = Vec::with_capacity(code.len());
    let mut pending_calls = Vec::new();
    for (unit, p) in code.iter().zip(&parsed) {
        let offset = symbols.len() as SymbolId;
        symbols.extend(to_records(&unit.path, p, offset));
        for (i, s) in p.symbols.iter().enumerate() {
            if let Some(parent) = s.parent {
                edges.push(StructuralEdge::new(
                    EdgeKind::Contains,
                    offset + parent as SymbolId,
                    offset + i as SymbolId,
                ));
            }
        }
        for c in &p.calls {
            pending_calls.push((offset + c.caller as SymbolId, c));
        }
        files.push(FileInfo {
            path: unit.path.clone(),
            includes: p.includes.clone(),
            parse_errors: p.error_count,
        });
    }

    let mut resolver = resolve::Resolver::new(&mut symbols);
    for (caller, call) in pending_calls {
        resolver.resolve_call(caller, call, &mut edges);
    }
    resolver.finish(&mut edges);

    edges.sort();
    edges.dedup();
    let mut index = StructuralIndex {
        symbols,
        edges,
        files,
        sources: repo
            .units
            .iter()
            .map(|u| (u.path.clone(), u.content.clone()))
            .collect(),
        repo_snapshot: repo.snapshot_id.clone(),
        by_name: BTreeMap::new(),
        by_qualified: BTreeMap::new(),
    };
    index.rebuild_maps();
    index
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn motivation() -> Repository {
        Repository::from_files(
            "/motivation",
            [
                (
                    "search_utils.h",
                    "// Free helper that searches the global index.\ninline void Search(const std::string& query) { (void)query; }\n",
                ),
                (
                    "search_class.h",
                    "class SearchManager;\n\n// Search engine bound to one index file.\nclass Search {\npublic:\n    explicit Search(const std::string& path);\n    void run(const std::string& query);\nprivate:\n    std::string path_;\n    SearchManager* manager_;\n};\n",
                ),
                (
                    "main.cpp",
                    "#include \"search_class.h\"\n#include \"search_utils.h\"\n\nint main() {\n    class Search engine(\"index.db\");\n    Search(\"hello\");\n    return 0;\n}\n",
                ),
            ],
        )
        .unwrap()
    }

    fn find<'a>(idx: &'a StructuralIndex, qn: &str, kind: SymbolKind) -> &'a SymbolRecord {
        idx.symbols
            .iter()
            .find(|s| s.qualified_name == qn && s.kind == kind)
            .unwrap_or_else(|| panic!("{qn} {kind}"))
    }

    #[test]
    fn motivation_corpus() {
        let idx = build_index(&motivation());
        idx.check_consistency().unwrap();
        let search = &idx.by_name["Search"];
        assert!(search.len() >= 2);
        let defs: Vec<_> = search
            .iter()
            .map(|&i| &idx.symbols[i as usize])
            .filter(|s| s.kind == SymbolKind::Class && s.is_definition)
            .collect();
        assert_eq!(defs.len(), 1);
        assert_eq!(defs[0].location.path, "search_class.h");

        let main = find(&idx, "main", SymbolKind::FreeFunction);
        let free = find(&idx, "Search", SymbolKind::FreeFunction);
        let ctor = find(&idx, "Search::Search", SymbolKind::Constructor);
        let calls: Vec<_> = idx
            .edges_of(EdgeKind::Calls)
            .filter(|e| e.from == main.symbol_id)
            .map(|e| e.to)
            .collect();
        assert_eq!(calls.len(), 2);
        assert!(calls.contains(&free.symbol_id) && calls.contains(&ctor.symbol_id));
        assert!(idx.snippet(defs[0]).starts_with("class Search {"));
    }

    #[test]
    fn parse_unit_examples() {
        let (s, e) = parse_unit(&SourceUnit::new("empty.h", ""));
        assert!(s.is_empty() && e.is_empty());
        let (s, _) = parse_unit(&SourceUnit::new("f.h", "class SearchManager;"));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].kind, SymbolKind::ForwardDeclaration);
        assert!(!s[0].is_definition);
    }

    #[test]
    fn single_base() {
        let repo = Repository::from_files("/", [("a.h", "struct A{}; struct B : A {};")]).unwrap();
        let idx = build_index(&repo);
        let inh: Vec<_> = idx.edges_of(EdgeKind::InheritsFrom).collect();
        assert_eq!(inh.len(), 1);
        assert_eq!(idx.symbols[inh[0].from as usize].name, "B");
        assert_eq!(idx.symbols[inh[0].to as usize].name, "A");
    }

    #[test]
    fn resolution_order_and_sentinels() {
        let src = "\
namespace ui { void update(); class Panel { void update(); void draw() { update(); refresh(); ::update(); } }; }
namespace db { void update(); void sync() { update(); missing(); } }
void update();
void tick() { update(); other::thing(); missing(); }
";
        let repo = Repository::from_files("/", [("a.cpp", src)]).unwrap();
        let idx = build_index(&repo);
        idx.check_consistency().unwrap();
        let callees = |caller: &str| -> Vec<String> {
            let from = idx.by_qualified[caller][0];
            idx.edges_of(EdgeKind::Calls)
                .filter(|e| e.from == from)
                .map(|e| idx.symbols[e.to as usize].qualified_name.clone())
                .collect()
        };
        assert_eq!(callees("ui::Panel::draw"), ["ui::Panel::update", "update", "unresolved:refresh"]);
        assert_eq!(callees("db::sync"), ["db::update", "unresolved:missing"]);
        assert_eq!(callees("tick"), ["update", "unresolved:missing", "unresolved:other::thing"]);
        let sentinels: Vec<_> = idx.symbols.iter().filter(|s| s.is_unresolved()).map(|s| s.name.as_str()).collect();
        assert_eq!(sentinels, ["unresolved:refresh", "unresolved:missing", "unresolved:other::thing"]);
    }

    #[test]
    fn overloads_and_overrides() {
        let src = "\
struct Base { virtual void f(int); void g(); virtual ~Base(); };
struct Mid : Base { };
struct Leaf : Mid { void f(int) override; void f(double); void g(); };
void foo(int); void foo(double); void foo(int, int);
void foo(int) {}
";
        let repo = Repository::from_files("/", [("a.h", src)]).unwrap();
        let idx = build_index(&repo);
        let ov: Vec<_> = idx
            .edges_of(EdgeKind::Overrides)
            .map(|e| (idx.symbols[e.from as usize].label(), idx.symbols[e.to as usize].label()))
            .collect();
        assert_eq!(ov, [("Leaf::f(int)@a.h:3".to_string(), "Base::f(int)@a.h:1".to_string())]);
        let foo_overloads = idx
            .edges_of(EdgeKind::OverloadOf)
            .filter(|e| idx.symbols[e.from as usize].qualified_name == "foo")
            .count();
        // four records named foo: every pair is linked
        assert_eq!(foo_overloads, 6);
    }

    #[test]
    fn deterministic_and_execution_independent() {
        let repo = motivation();
        let a = build_index_with(&repo, Execution::Sequential);
        let b = build_index_with(&repo, Execution::Parallel);
        assert_eq!(a, b);
    }
}
