use cppscope_core::index::{build_index, EdgeKind, StructuralIndex, SymbolRecord};
use cppscope_core::query::{self, QueryError};
use cppscope_core::Repository;
use cppscope_testkit::{generate, Corpus, CorpusConfig, RefEdge, RefEdgeKind, RefSymbol};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 240;

fn corpus(seed: u64) -> Corpus {
    generate(&mut ChaCha8Rng::seed_from_u64(seed), &CorpusConfig::default())
}

fn index_of(c: &Corpus) -> StructuralIndex {
    let repo = Repository::from_files("/corpus", c.files.iter().map(|(p, s)| (p.as_str(), s.as_str()))).unwrap();
    build_index(&repo)
}

fn as_ref(s: &SymbolRecord) -> RefSymbol {
    RefSymbol {
        id: s.symbol_id,
        kind: s.kind.as_str(),
        name: s.name.clone(),
        qualified_name: s.qualified_name.clone(),
        signature: s.signature.clone(),
        path: s.location.path.clone(),
        start_line: s.location.start_line,
        end_line: s.location.end_line,
        is_definition: s.is_definition,
        template_params: s.template_params.clone(),
        is_virtual: s.is_virtual,
        is_override: s.is_override,
        bases: s.bases.clone(),
    }
}

fn edge_kind(k: EdgeKind) -> RefEdgeKind {
    match k {
        EdgeKind::Contains => RefEdgeKind::Contains,
        EdgeKind::InheritsFrom => RefEdgeKind::InheritsFrom,
        EdgeKind::Calls => RefEdgeKind::Calls,
        EdgeKind::OverloadOf => RefEdgeKind::OverloadOf,
        EdgeKind::Overrides => RefEdgeKind::Overrides,
    }
}

fn dump(c: &Corpus) -> String {
    c.files.iter().map(|(p, s)| format!("==== {p}\n{s}")).collect()
}

#[test]
fn index_matches_reference_graph() {
    for seed in 0..SEEDS {
        let c = corpus(seed);
        let idx = index_of(&c);
        idx.check_consistency().unwrap();
        let got: Vec<RefSymbol> = idx.symbols.iter().map(as_ref).collect();
        for (i, (g, e)) in got.iter().zip(&c.symbols).enumerate() {
            assert_eq!(g, e, "seed {seed}, symbol {i}\n{}", dump(&c));
        }
        assert_eq!(got.len(), c.symbols.len(), "seed {seed}\n{}", dump(&c));
        assert!(idx.symbols.iter().all(|s| s.leading_comment.is_empty()));
        let edges: Vec<RefEdge> = idx
            .edges
            .iter()
            .map(|e| RefEdge {
                kind: edge_kind(e.kind),
                from: e.from,
                to: e.to,
                site: e.call_site.map(|s| (s.line, s.column)),
            })
            .collect();
        if edges != c.edges {
            let missing: Vec<_> = c.edges.iter().filter(|e| !edges.contains(e)).collect();
            let extra: Vec<_> = edges.iter().filter(|e| !c.edges.contains(e)).collect();
            panic!("seed {seed}: missing {missing:?}\nextra {extra:?}\n{}", dump(&c));
        }
    }
}

fn err_name(e: &QueryError) -> &'static str {
    match e {
        QueryError::NotFound(_) => "NotFound",
        QueryError::ScopeNotFound(_) => "ScopeNotFound",
        QueryError::AmbiguousName { .. } => "AmbiguousName",
        QueryError::UnknownClass(_) => "UnknownClass",
        QueryError::UnknownFunction { .. } => "UnknownFunction",
        QueryError::NoSeedsResolved => "NoSeedsResolved",
    }
}

/// Names worth asking about: everything in the corpus, qualified forms,
/// suffixes and a few that cannot exist.
fn probe_names(c: &Corpus) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for s in &c.symbols {
        names.push(s.name.clone());
        names.push(s.qualified_name.clone());
        names.push(format!("::{}", s.qualified_name));
        if let Some((_, tail)) = s.qualified_name.split_once("::") {
            names.push(tail.to_string());
        }
    }
    names.extend(["", "Nope", "a b", "::", "alpha::", "1x", "inner::Nope"].map(String::from));
    names.sort();
    names.dedup();
    names
}

#[test]
fn queries_match_reference_answers() {
    for seed in 0..SEEDS / 2 {
        let c = corpus(seed);
        let idx = index_of(&c);
        let names = probe_names(&c);
        let scopes: Vec<String> = ["", "alpha", "::alpha", "beta", "inner", "alpha::inner", "zeta"]
            .iter()
            .map(|s| s.to_string())
            .chain(c.symbols.iter().filter(|s| s.is_class_def()).map(|s| s.qualified_name.clone()))
            .collect();

        for n in &names {
            let got = query::find_class(&idx, n)
                .map(|v| v.into_iter().map(|m| m.symbol.symbol_id).collect::<Vec<_>>())
                .map_err(|e| err_name(&e));
            assert_eq!(got, c.find_class(n), "seed {seed} find_class({n:?})");

            let got = query::get_inheritance_chain(&idx, n)
                .map(|ch| (ch.focus, ch.ancestors, ch.descendants))
                .map_err(|e| err_name(&e));
            assert_eq!(got, c.inheritance_chain(n), "seed {seed} chain({n:?})");
        }
        let fnames: Vec<String> = c
            .symbols
            .iter()
            .filter(|s| s.is_function() && !s.is_sentinel())
            .map(|s| s.name.clone())
            .chain(["missing".to_string()])
            .collect();
        for scope in &scopes {
            for f in &fnames {
                let got = query::find_function(&idx, scope, f)
                    .map(|v| v.into_iter().map(|m| m.symbol.symbol_id).collect::<Vec<_>>())
                    .map_err(|e| err_name(&e));
                assert_eq!(got, c.find_function(scope, f), "seed {seed} find_function({scope:?}, {f:?})");

                let got = query::get_function_calls(&idx, scope, f)
                    .map(|v| {
                        v.into_iter()
                            .map(|x| (x.caller, x.callee, x.call_site.path, x.call_site.line, x.call_site.column))
                            .collect::<Vec<_>>()
                    })
                    .map_err(|e| err_name(&e));
                assert_eq!(got, c.function_calls(scope, f), "seed {seed} calls({scope:?}, {f:?})");
            }
        }
    }
}

#[test]
fn corpora_exercise_every_edge_kind() {
    let mut seen = std::collections::BTreeMap::new();
    let mut sentinels = 0;
    let mut templates = 0;
    for seed in 0..SEEDS {
        let c = corpus(seed);
        for e in &c.edges {
            *seen.entry(e.kind).or_insert(0usize) += 1;
        }
        sentinels += c.symbols.iter().filter(|s| s.is_sentinel()).count();
        templates += c.symbols.iter().filter(|s| !s.template_params.is_empty()).count();
    }
    println!("{seen:?} sentinels={sentinels} templates={templates}");
    assert_eq!(seen.len(), 5);
    assert!(seen.values().all(|&n| n >= 50), "{seen:?}");
    assert!(sentinels > 50 && templates > 50);
}
