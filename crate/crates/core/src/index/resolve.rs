//! Name resolution for call and base-class targets, and the derived
//! overload/override relations.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{CallSite, EdgeKind, Location, StructuralEdge, SymbolId, SymbolKind, SymbolRecord, UNRESOLVED_PREFIX};
use crate::cpp::{CallKind, RawCall};

pub(super) struct Resolver<'a> {
    symbols: &'a mut Vec<SymbolRecord>,
    by_qn: HashMap<String, Vec<SymbolId>>,
    by_name: HashMap<String, Vec<SymbolId>>,
    sentinels: HashMap<String, SymbolId>,
    real_count: usize,
}

fn last_segment(text: &str) -> &str {
    text.rsplit("::").next().unwrap_or(text)
}

/// `A::B::c` -> `A::B`; `c` -> `""`.
pub(crate) fn parent_scope(qn: &str) -> &str {
    qn.rfind("::").map_or("", |i| &qn[..i])
}

pub(crate) fn join(scope: &str, name: &str) -> String {
    if scope.is_empty() {
        name.to_string()
    } else {
        format!("{scope}::{name}")
    }
}

impl<'a> Resolver<'a> {
    pub(super) fn new(symbols: &'a mut Vec<SymbolRecord>) -> Resolver<'a> {
        let mut by_qn: HashMap<String, Vec<SymbolId>> = HashMap::new();
        let mut by_name: HashMap<String, Vec<SymbolId>> = HashMap::new();
        for s in symbols.iter() {
            by_qn.entry(s.qualified_name.clone()).or_default().push(s.symbol_id);
            by_name.entry(s.name.clone()).or_default().push(s.symbol_id);
        }
        let real_count = symbols.len();
        Resolver {
            symbols,
            by_qn,
            by_name,
            sentinels: HashMap::new(),
            real_count,
        }
    }

    fn exact(&self, qn: &str, accept: &dyn Fn(&SymbolRecord) -> bool) -> Vec<SymbolId> {
        self.by_qn
            .get(qn)
            .into_iter()
            .flatten()
            .copied()
            .filter(|&id| accept(&self.symbols[id as usize]))
            .collect()
    }

    fn suffix(&self, text: &str, accept: &dyn Fn(&SymbolRecord) -> bool) -> Vec<SymbolId> {
        let tail = format!("::{text}");
        self.by_name
            .get(last_segment(text))
            .into_iter()
            .flatten()
            .copied()
            .filter(|&id| {
                let s = &self.symbols[id as usize];
                (s.qualified_name == text || s.qualified_name.ends_with(&tail)) && accept(s)
            })
            .collect()
    }

    /// Enclosing class, innermost namespace, then anywhere by name or
    /// qualified suffix. A leading `::` means global scope only.
    fn lookup(
        &self,
        text: &str,
        class_scope: Option<&str>,
        namespace_scope: &str,
        accept: &dyn Fn(&SymbolRecord) -> bool,
    ) -> Vec<SymbolId> {
        if let Some(global) = text.strip_prefix("::") {
            return self.exact(global, accept);
        }
        if let Some(class) = class_scope {
            let hits = self.exact(&join(class, text), accept);
            if !hits.is_empty() {
                return hits;
            }
        }
        let hits = self.exact(&join(namespace_scope, text), accept);
        if !hits.is_empty() {
            return hits;
        }
        self.suffix(text, accept)
    }

    fn constructors_of(&self, class_ids: &[SymbolId]) -> Vec<SymbolId> {
        let mut out = BTreeSet::new();
        for &c in class_ids {
            let class = &self.symbols[c as usize];
            let ctor_qn = join(&class.qualified_name, &class.name);
            let ctors = self.exact(&ctor_qn, &|s| s.kind == SymbolKind::Constructor);
            if ctors.is_empty() {
                out.insert(c);
            } else {
                out.extend(ctors);
            }
        }
        out.into_iter().collect()
    }

    fn sentinel(&mut self, text: &str) -> SymbolId {
        if let Some(&id) = self.sentinels.get(text) {
            return id;
        }
        let id = self.symbols.len() as SymbolId;
        let name = format!("{UNRESOLVED_PREFIX}{text}");
        self.symbols.push(SymbolRecord {
            symbol_id: id,
            kind: SymbolKind::FreeFunction,
            name: name.clone(),
            qualified_name: name,
            signature: String::new(),
            location: Location {
                path: String::new(),
                start_line: 0,
                end_line: 0,
            },
            is_definition: false,
            template_params: String::new(),
            is_virtual: false,
            is_override: false,
            bases: Vec::new(),
            leading_comment: String::new(),
        });
        self.sentinels.insert(text.to_string(), id);
        id
    }

    pub(super) fn resolve_call(&mut self, caller: SymbolId, call: &RawCall, edges: &mut Vec<StructuralEdge>) {
        let class_scope = call.class_scope.as_deref();
        let ns = call.namespace_scope.as_str();
        let is_callable = |s: &SymbolRecord| s.kind.is_function() && s.kind != SymbolKind::Constructor;
        let is_class = |s: &SymbolRecord| s.kind.is_class_like() && s.is_definition;
        let mut targets = match call.kind {
            CallKind::Plain | CallKind::Member => self.lookup(&call.callee, class_scope, ns, &is_callable),
            CallKind::Construct => Vec::new(),
        };
        if targets.is_empty() && call.kind != CallKind::Member {
            let classes = self.lookup(&call.callee, class_scope, ns, &is_class);
            targets = self.constructors_of(&classes);
        }
        targets.sort_unstable();
        targets.dedup();
        if targets.is_empty() {
            targets.push(self.sentinel(&call.callee));
        }
        let site = CallSite {
            line: call.line,
            column: call.column,
        };
        for to in targets {
            edges.push(StructuralEdge {
                kind: EdgeKind::Calls,
                from: caller,
                to,
                call_site: Some(site),
            });
        }
    }

    /// Inheritance, overload and override edges.
    pub(super) fn finish(self, edges: &mut Vec<StructuralEdge>) {
        let n = self.real_count;
        let is_class = |s: &SymbolRecord| s.kind.is_class_like() && s.is_definition;

        let mut parents: BTreeMap<SymbolId, Vec<SymbolId>> = BTreeMap::new();
        for s in &self.symbols[..n] {
            if !is_class(s) || s.bases.is_empty() {
                continue;
            }
            for base in &s.bases {
                let mut hits;
                let mut scope = s.scope();
                loop {
                    hits = self.exact(&join(scope, base), &is_class);
                    hits.retain(|&h| h != s.symbol_id);
                    if !hits.is_empty() || scope.is_empty() {
                        break;
                    }
                    scope = parent_scope(scope);
                }
                if hits.is_empty() {
                    hits = self.suffix(base, &is_class);
                    hits.retain(|&h| h != s.symbol_id);
                }
                hits.sort_unstable();
                for h in hits {
                    edges.push(StructuralEdge::new(EdgeKind::InheritsFrom, s.symbol_id, h));
                    parents.entry(s.symbol_id).or_default().push(h);
                }
            }
        }

        let mut groups: BTreeMap<&str, Vec<SymbolId>> = BTreeMap::new();
        for s in &self.symbols[..n] {
            if s.kind.is_function() {
                groups.entry(&s.qualified_name).or_default().push(s.symbol_id);
            }
        }
        for ids in groups.values() {
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    edges.push(StructuralEdge::new(EdgeKind::OverloadOf, a, b));
                }
            }
        }

        let mut members: HashMap<&str, Vec<SymbolId>> = HashMap::new();
        for s in &self.symbols[..n] {
            if s.kind.is_function() && s.kind != SymbolKind::Constructor {
                members.entry(s.scope()).or_default().push(s.symbol_id);
            }
        }
        for s in &self.symbols[..n] {
            if !is_class(s) {
                continue;
            }
            let Some(own) = members.get(s.qualified_name.as_str()) else {
                continue;
            };
            for ancestor in ancestors(&parents, s.symbol_id) {
                let a = &self.symbols[ancestor as usize];
                let Some(theirs) = members.get(a.qualified_name.as_str()) else {
                    continue;
                };
                for &m in own {
                    let md = &self.symbols[m as usize];
                    for &b in theirs {
                        let bd = &self.symbols[b as usize];
                        if m != b
                            && md.name == bd.name
                            && md.signature == bd.signature
                            && (bd.is_virtual || md.is_override)
                        {
                            edges.push(StructuralEdge::new(EdgeKind::Overrides, m, b));
                        }
                    }
                }
            }
        }
    }
}

/// Transitive bases of `start`, excluding `start` itself.
fn ancestors(parents: &BTreeMap<SymbolId, Vec<SymbolId>>, start: SymbolId) -> Vec<SymbolId> {
    let mut seen = BTreeSet::from([start]);
    let mut out = Vec::new();
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for &p in parents.get(&c).into_iter().flatten() {
            if seen.insert(p) {
                out.push(p);
                queue.push_back(p);
            }
        }
    }
    out
}
