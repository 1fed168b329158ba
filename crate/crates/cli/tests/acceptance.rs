//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use anyhow::{anyhow, ensure, Result};
use cppscope_core::config::{Config, SelectionConfig, Strategy};
use cppscope_core::index::{build_index, load_container, EdgeKind, StructuralIndex};
use cppscope_core::intent::{
    build_intent_index, query_code_intent, Granularity, HashingProvider, LocalizationResult,
};
use cppscope_core::pipeline::{
    complexity, generate_candidates, normalize, prune, render_transcript, reproduce, select, Action, AgentBackend,
    BaselineCache, PipelineError, SelectEnv, VoteContext,
};
use cppscope_core::protocol::{handle_line, ToolContext, TOOLS};
use cppscope_core::query::{self, DefectSubgraph};
use cppscope_core::repo::{apply_patch, parse_unified_diff, run_test, RunnerConfig, TestCase, TestRole, TestStatus};
use cppscope_core::{Execution, IssueDescription, PatchCandidate, Repository};
use cppscope_testkit::corpus::class_dag;
use cppscope_testkit::{generate, oracles, patches, Corpus, CorpusConfig, RefEdge, RefEdgeKind, RefSymbol};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_cppscope");

fn cli(args: &[&str], stdin: Option<&str>) -> (i32, String, String) {
    let mut child = Command::new(BIN)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    {
        let mut input = child.stdin.take().unwrap();
        if let Some(s) = stdin {
            input.write_all(s.as_bytes()).unwrap();
        }
    }
    let out = child.wait_with_output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_tree(dir: &Path, files: &[(&str, &str)]) {
    for (p, c) in files {
        let path = dir.join(p);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, c).unwrap();
    }
}

fn repo_of(files: &[(String, String)]) -> Repository {
    Repository::from_files("/acc", files.iter().map(|(p, s)| (p.as_str(), s.as_str()))).unwrap()
}

// ---- 1 ----

const SEARCH_UTILS: &str =
    "// Free helper that searches the global index.\ninline void Search(const std::string& query) { (void)query; }\n";
const SEARCH_CLASS: &str = "class SearchManager;\n\n// Search engine bound to one index file.\nclass Search {\npublic:\n    explicit Search(const std::string& path);\n    void run(const std::string& query);\nprivate:\n    std::string path_;\n    SearchManager* manager_;\n};\n";
const SEARCH_MAIN: &str = "#include \"search_class.h\"\n#include \"search_utils.h\"\n\nint main() {\n    class Search engine(\"index.db\");\n    Search(\"hello\");\n    return 0;\n}\n";

fn motivation() -> Result<()> {
    let files = [
        ("search_utils.h", SEARCH_UTILS),
        ("search_class.h", SEARCH_CLASS),
        ("main.cpp", SEARCH_MAIN),
    ];
    let repo = Repository::from_files("/motivation", files).unwrap();
    let grep = query::grep_baseline(&repo, "Search");
    let grep_files: BTreeSet<&str> = grep.iter().map(|h| h.path.as_str()).collect();
    ensure!(grep_files.len() == 3, "grep files {grep_files:?}");
    ensure!(grep.len() >= 5, "grep count {}", grep.len());

    let idx = build_index(&repo);
    let found = query::find_class(&idx, "Search").map_err(|e| anyhow!("{e}"))?;
    ensure!(found.len() == 1, "find_class returned {}", found.len());
    let s = &found[0].symbol;
    ensure!(s.location.path == "search_class.h" && s.kind.as_str() == "class" && s.is_definition);

    // the same through the CLI
    let dir = tempfile::tempdir()?;
    write_tree(dir.path(), &files);
    let out = dir.path().join("m.idx");
    let (code, stdout, _) = cli(&["index", "--root", dir.path().to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    ensure!(code == 0);
    let counts: serde_json::Value = serde_json::from_str(stdout.trim())?;
    ensure!(counts["symbols"].as_u64().unwrap_or(0) >= 6, "{counts}");
    let (code, stdout, _) = cli(&["query", "--index", out.to_str().unwrap(), "FindClass", "--arg", "name=Search"], None);
    ensure!(code == 0);
    let v: serde_json::Value = serde_json::from_str(stdout.trim())?;
    ensure!(v["payload"]["data"].as_array().map(Vec::len) == Some(1), "{v}");
    Ok(())
}

// ---- 2 ----

fn as_ref(s: &cppscope_core::SymbolRecord) -> RefSymbol {
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

fn ref_edges(idx: &StructuralIndex) -> Vec<RefEdge> {
    idx.edges
        .iter()
        .map(|e| RefEdge {
            kind: match e.kind {
                EdgeKind::Contains => RefEdgeKind::Contains,
                EdgeKind::InheritsFrom => RefEdgeKind::InheritsFrom,
                EdgeKind::Calls => RefEdgeKind::Calls,
                EdgeKind::OverloadOf => RefEdgeKind::OverloadOf,
                EdgeKind::Overrides => RefEdgeKind::Overrides,
            },
            from: e.from,
            to: e.to,
            site: e.call_site.map(|s| (s.line, s.column)),
        })
        .collect()
}

fn err_kind(e: query::QueryError) -> &'static str {
    use query::QueryError::*;
    match e {
        NotFound(_) => "NotFound",
        ScopeNotFound(_) => "ScopeNotFound",
        AmbiguousName { .. } => "AmbiguousName",
        UnknownClass(_) => "UnknownClass",
        UnknownFunction { .. } => "UnknownFunction",
        NoSeedsResolved => "NoSeedsResolved",
    }
}

fn structural_equivalence() -> Result<()> {
    let mut kinds = BTreeSet::new();
    for seed in 0..200u64 {
        let c: Corpus = generate(&mut ChaCha8Rng::seed_from_u64(10_000 + seed), &CorpusConfig::default());
        let declarations = c.symbols.iter().filter(|s| !s.is_sentinel()).count();
        ensure!(declarations <= 100, "seed {seed}: {declarations} declarations");
        let idx = build_index(&repo_of(&c.files));
        let got: Vec<RefSymbol> = idx.symbols.iter().map(as_ref).collect();
        ensure!(got == c.symbols, "seed {seed}: symbols differ");
        ensure!(ref_edges(&idx) == c.edges, "seed {seed}: edges differ");
        kinds.extend(c.symbols.iter().map(|s| s.kind));

        let classes: Vec<&RefSymbol> = c.symbols.iter().filter(|s| s.is_class_def()).collect();
        for s in classes.iter().copied().chain(c.symbols.iter().filter(|s| s.kind == "namespace")) {
            for n in [s.name.clone(), s.qualified_name.clone()] {
                let got = query::find_class(&idx, &n).map(|v| v.iter().map(|m| m.symbol.symbol_id).collect());
                ensure!(got.map_err(err_kind) == c.find_class(&n), "seed {seed} find_class {n}");
                let got = query::get_inheritance_chain(&idx, &n).map(|ch| (ch.focus, ch.ancestors, ch.descendants));
                ensure!(got.map_err(err_kind) == c.inheritance_chain(&n), "seed {seed} chain {n}");
            }
        }
        let scopes: Vec<String> = std::iter::once(String::new())
            .chain(["alpha", "::beta", "inner", "nowhere"].map(String::from))
            .chain(classes.iter().map(|s| s.qualified_name.clone()))
            .collect();
        let names: BTreeSet<&str> =
            c.symbols.iter().filter(|s| s.is_function() && !s.is_sentinel()).map(|s| s.name.as_str()).collect();
        for scope in &scopes {
            for n in &names {
                let got = query::find_function(&idx, scope, n).map(|v| v.iter().map(|m| m.symbol.symbol_id).collect());
                ensure!(got.map_err(err_kind) == c.find_function(scope, n), "seed {seed} find_function {scope} {n}");
                let got = query::get_function_calls(&idx, scope, n).map(|v| {
                    v.into_iter()
                        .map(|x| (x.caller, x.callee, x.call_site.path, x.call_site.line, x.call_site.column))
                        .collect()
                });
                ensure!(got.map_err(err_kind) == c.function_calls(scope, n), "seed {seed} calls {scope} {n}");
            }
        }
    }
    for k in ["namespace", "template_class", "template_function", "forward_declaration", "constructor"] {
        ensure!(kinds.contains(k), "corpora never produced {k}");
    }
    Ok(())
}

// ---- 3 ----

fn inheritance_dags() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut diamonds = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=20);
        let (src, parents) = class_dag(&mut rng, n);
        let idx = build_index(&repo_of(&[("dag.h".into(), src)]));
        let anc = oracles::ancestors(&parents);
        for i in 0..n {
            let chain = query::get_inheritance_chain(&idx, &format!("K{i}")).map_err(|e| anyhow!("{e}"))?;
            let names: Vec<String> = chain.ancestors.iter().map(|&a| idx.symbols[a as usize].name.clone()).collect();
            let mut want: Vec<(usize, String)> = anc[i].iter().map(|(&a, &d)| (d, format!("K{a}"))).collect();
            want.sort();
            ensure!(names == want.iter().map(|w| w.1.clone()).collect::<Vec<_>>(), "K{i} ancestors");
            let unique: BTreeSet<&String> = names.iter().collect();
            ensure!(unique.len() == names.len(), "K{i} lists an ancestor twice");
            // a diamond: some ancestor reachable along two different parents
            let via: Vec<BTreeSet<usize>> = parents[i]
                .iter()
                .map(|&p| anc[p].keys().copied().chain([p]).collect())
                .collect();
            if via.iter().enumerate().any(|(x, a)| via[x + 1..].iter().any(|b| !a.is_disjoint(b))) {
                diamonds += 1;
            }
            let mut down: Vec<(usize, String)> =
                (0..n).filter_map(|j| anc[j].get(&i).map(|&d| (d, format!("K{j}")))).collect();
            down.sort();
            let got: Vec<String> = chain.descendants.iter().map(|&d| idx.symbols[d as usize].name.clone()).collect();
            ensure!(got == down.into_iter().map(|w| w.1).collect::<Vec<_>>(), "K{i} descendants");
        }
    }
    ensure!(diamonds > 0, "no diamond was generated");
    Ok(())
}

// ---- 4 ----

fn intent_oracle() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let words = ["run", "update", "value", "alpha", "beta", "class", "template", "constructor", "size", "fn3"];
    for t in 0..50u64 {
        let c = generate(&mut ChaCha8Rng::seed_from_u64(20_000 + t), &CorpusConfig::default());
        let repo = repo_of(&c.files);
        let idx = build_index(&repo);
        let iidx = build_intent_index(&repo, &idx, &HashingProvider, &Granularity::all())?;
        let q: Vec<&str> = (0..rng.gen_range(1..5)).map(|_| *words.choose(&mut rng).unwrap()).collect();
        let q = q.join(" ");
        let k = rng.gen_range(1..=iidx.docs.len() + 1);
        let got = query_code_intent(&iidx, &HashingProvider, &q, k)?;
        let entries: Vec<(String, Vec<f64>)> = iidx
            .docs
            .iter()
            .map(|d| (d.label.clone(), oracles::hashing_embed(&d.summary).unwrap()))
            .collect();
        let want = oracles::scan_scores(&oracles::hashing_embed(&q).unwrap(), &entries);
        ensure!(got.len() == k.min(want.len()));
        for (h, (s, l)) in got.iter().zip(&want) {
            ensure!((h.score - s).abs() < 1e-12, "triple {t}: score");
            // labels agree except inside groups of numerically equal scores
            if h.label != *l {
                ensure!(want.iter().any(|(s2, l2)| *l2 == h.label && (s2 - s).abs() < 1e-12), "triple {t}: label");
            }
        }
        let doc = iidx.docs.choose(&mut rng).unwrap();
        let top = query_code_intent(&iidx, &HashingProvider, &doc.summary, 1)?;
        ensure!((top[0].score - 1.0).abs() <= 1e-6, "self similarity {}", top[0].score);
    }
    Ok(())
}

// ---- 5 ----

const CALC: &str = "int answer() {\n    return 41;\n}\nint other() {\n    return 1;\n}\n";

fn toy_files() -> Vec<(&'static str, &'static str)> {
    vec![("calc.cpp", CALC), ("flag.txt", "41\n"), ("keep.txt", "ok\n")]
}

fn toy_tests() -> (TestCase, Vec<TestCase>) {
    let t = Duration::from_secs(10);
    (
        TestCase::new("repro", "grep -qx 42 flag.txt", TestRole::Reproducer, t),
        vec![
            TestCase::new("keep", "grep -qx ok keep.txt", TestRole::Regression, t),
            TestCase::new("never", "test -f missing.txt", TestRole::Regression, t),
        ],
    )
}

const FIX: &str = "--- a/flag.txt\n+++ b/flag.txt\n@@ -1,1 +1,1 @@\n-41\n+42\n";
const WRONG: &str = "--- a/flag.txt\n+++ b/flag.txt\n@@ -1,1 +1,1 @@\n-41\n+43\n";
const BREAKS: &str =
    "--- a/flag.txt\n+++ b/flag.txt\n@@ -1,1 +1,1 @@\n-41\n+42\n--- a/keep.txt\n+++ b/keep.txt\n@@ -1,1 +1,1 @@\n-ok\n+bad\n";
const COMMENT: &str = "--- a/calc.cpp\n+++ b/calc.cpp\n@@ -1,2 +1,3 @@\n int answer() {\n+    // TODO: check\n     return 41;\n";
const SPACES: &str = "--- a/calc.cpp\n+++ b/calc.cpp\n@@ -2,1 +2,1 @@\n-    return 41;\n+        return   41;\n";

fn big_fix() -> String {
    let mut d = String::from(FIX);
    d.push_str("--- a/calc.cpp\n+++ b/calc.cpp\n@@ -2,1 +2,17 @@\n-    return 41;\n");
    for i in 0..16 {
        d.push_str(&format!("+    int v{i} = {i};\n"));
    }
    d.push_str("+    return 41;\n");
    d
}

fn run_select(
    repo: &Repository,
    candidates: &[PatchCandidate],
    strategy: Strategy,
) -> Result<cppscope_core::pipeline::SelectionReport> {
    let (repro, regression) = toy_tests();
    let idx = build_index(repo);
    let issue = IssueDescription::new("answer() returns 41", "the flag must read 42");
    let loc = LocalizationResult {
        intent_hits: Vec::new(),
        subgraph: DefectSubgraph {
            seeds: Vec::new(),
            members: BTreeSet::new(),
            hop_limit: 2,
        },
        intersection: BTreeSet::new(),
        fallback_used: false,
    };
    let cfg = SelectionConfig {
        strategy,
        ..SelectionConfig::default()
    };
    let runner = RunnerConfig::default();
    let cache = BaselineCache::new();
    let env = SelectEnv {
        runner: &runner,
        cache: &cache,
        exec: Execution::Parallel,
    };
    let vote = VoteContext {
        issue: &issue,
        localization: &loc,
        index: &idx,
        provider: &HashingProvider,
        weights: cfg.normalized_weights(),
    };
    Ok(select(repo, &regression, &repro, candidates, &[], &cfg, &env, &vote, None)?)
}

fn algorithm_contract() -> Result<()> {
    let repo = Repository::from_files("/toy", toy_files()).unwrap();
    let (repro, regression) = toy_tests();
    let runner = RunnerConfig::default();
    let parse = |d: &str| parse_unified_diff(d).unwrap();
    let all: Vec<PatchCandidate> = [FIX, WRONG, BREAKS, COMMENT, SPACES, big_fix().as_str()].map(parse).to_vec();

    // (d) cosmetic candidates are never behavioral
    ensure!(!normalize(&parse(COMMENT)).is_behavioral && !normalize(&parse(SPACES)).is_behavioral);
    // hand-enumerated complexities: FIX 1+1+10, big 1+1 + 1+17 + 2*10
    ensure!(complexity(&normalize(&parse(FIX))) == 12);
    ensure!(complexity(&normalize(&parse(&big_fix()))) == 40);

    for strategy in [Strategy::Vote, Strategy::MinComplexity] {
        let report = run_select(&repo, &all, strategy)?;
        let chosen = report.selected.clone().ok_or_else(|| anyhow!("{strategy:?}: nothing selected"))?;
        // (a) re-check the winner independently
        let patched = apply_patch(&repo, &chosen)?;
        ensure!(run_test(&patched, &repro, &runner)?.status == TestStatus::Pass);
        for t in &regression {
            ensure!(run_test(&patched, t, &runner)?.status == run_test(&repo, t, &runner)?.status);
        }
        let invalid: BTreeSet<String> =
            report.verdicts.iter().filter(|v| !v.valid).map(|v| v.candidate.clone()).collect();
        ensure!(invalid.contains(&parse(WRONG).id) && invalid.contains(&parse(BREAKS).id));
        ensure!(report.pruned.iter().all(|p| p.source != parse(COMMENT).id && p.source != parse(SPACES).id));
        // (c) argmin over {12, 40}
        if strategy == Strategy::MinComplexity {
            ensure!(chosen.diff == FIX, "min_complexity chose {}", chosen.diff);
        }
    }
    // (b) no valid candidate means FAILURE
    let losers: Vec<PatchCandidate> = [WRONG, BREAKS, COMMENT, SPACES].map(parse).to_vec();
    for strategy in [Strategy::Vote, Strategy::MinComplexity] {
        ensure!(run_select(&repo, &losers, strategy)?.selected.is_none());
    }
    Ok(())
}

// ---- 6 ----

fn pruning_laws() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for set in 0..100 {
        let base = patches::base_file(&mut rng);
        let n = rng.gen_range(1..12);
        let cands: Vec<PatchCandidate> =
            (0..n).map(|_| parse_unified_diff(&patches::candidate(&mut rng, &base).diff).unwrap()).collect();
        let once = prune(&cands);
        let reps: Vec<PatchCandidate> = once.iter().map(|p| p.to_candidate()).collect();
        let twice = prune(&reps);
        ensure!(
            twice.iter().map(|p| &p.normalized_diff).eq(once.iter().map(|p| &p.normalized_diff)),
            "set {set}: not idempotent"
        );
        let mut shuffled = cands.clone();
        shuffled.shuffle(&mut rng);
        ensure!(prune(&shuffled) == once, "set {set}: order dependent");
    }
    Ok(())
}

// ---- 7 ----

fn pipeline_fixture(dir: &Path, patcher: &[Action], with_reproducer: bool) -> Vec<String> {
    write_tree(&dir.join("repo"), &toy_files());
    std::fs::write(dir.join("issue.md"), "# answer() returns 41\n\nThe flag file must read 42.\n").unwrap();
    let mut manifest = String::from("[[test]]\nid = \"keep\"\ncommand = \"grep -qx ok keep.txt\"\nrole = \"regression\"\n");
    if with_reproducer {
        manifest.push_str("\n[[test]]\nid = \"repro\"\ncommand = \"grep -qx 42 flag.txt\"\nrole = \"reproducer\"\n");
    }
    std::fs::write(dir.join("tests.toml"), manifest).unwrap();
    std::fs::write(dir.join("patcher.jsonl"), render_transcript(patcher)).unwrap();
    let s = |p: &str| dir.join(p).to_str().unwrap().to_string();
    vec![
        "pipeline".into(),
        "--repo".into(),
        s("repo"),
        "--issue".into(),
        s("issue.md"),
        "--tests".into(),
        s("tests.toml"),
        "--patcher".into(),
        s("patcher.jsonl"),
    ]
}

fn end_to_end_determinism() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let patcher = vec![
        Action::ToolCall {
            tool: "FindFunction".into(),
            args: serde_json::from_str(r#"{"name":"answer"}"#)?,
            expect: None,
        },
        Action::EmitPatch { diff: COMMENT.into() },
        Action::EmitPatch { diff: big_fix() },
        Action::EmitPatch { diff: WRONG.into() },
        Action::EmitPatch { diff: FIX.into() },
        Action::Stop,
    ];
    let args = pipeline_fixture(dir.path(), &patcher, true);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let runs: Vec<(i32, String)> = (0..3).map(|_| cli(&args, None)).map(|(c, o, _)| (c, o)).collect();
    ensure!(runs.iter().all(|r| *r == runs[0]), "runs differ: {runs:?}");
    ensure!(runs[0].0 == 0, "exit {}", runs[0].0);
    ensure!(runs[0].1 == FIX || runs[0].1 == big_fix(), "unexpected diff {}", runs[0].1);

    let mut min = args.clone();
    let cfg = dir.path().join("min.toml");
    std::fs::write(&cfg, "[selection]\nstrategy = \"min_complexity\"\n")?;
    min.extend(["--config", cfg.to_str().unwrap()]);
    let (code, out, _) = cli(&min, None);
    ensure!(code == 0 && out == FIX, "min_complexity run: {code} {out}");

    // stage attribution
    let d2 = tempfile::tempdir()?;
    let args = pipeline_fixture(d2.path(), &[Action::EmitPatch { diff: COMMENT.into() }], true);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, out, _) = cli(&args, None);
    ensure!(code == 5 && out.starts_with("FAILURE (selection)"), "{code} {out}");
    let d3 = tempfile::tempdir()?;
    let args = pipeline_fixture(d3.path(), &[Action::EmitPatch { diff: FIX.into() }], false);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, out, _) = cli(&args, None);
    ensure!(code == 3 && out.starts_with("FAILURE (reproduction)"), "{code} {out}");
    Ok(())
}

// ---- 8 ----

const LOC_A: &str = "int alpha() {\n    return 1;\n}\nint beta() {\n    return 2;\n}\n";
const LOC_B: &str = "namespace n {\nint gamma() {\n    return 3;\n}\n}\n";

fn truth(path: &str, line: u32, old: &str) -> String {
    format!("--- a/{path}\n+++ b/{path}\n@@ -{line},1 +{line},1 @@\n-{old}\n+    return 9;\n")
}

fn eval_fixture(instances: &[(&str, String, Vec<&str>)]) -> serde_json::Value {
    let inst: Vec<serde_json::Value> = instances
        .iter()
        .map(|(id, diff, pred)| {
            serde_json::json!({
                "id": id,
                "files": {"a.cpp": LOC_A, "b.cpp": LOC_B},
                "truth_diff": diff,
                "predicted_symbols": pred,
            })
        })
        .collect();
    serde_json::json!({ "instances": inst })
}

fn run_eval(fixture: &serde_json::Value) -> Result<serde_json::Value> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("fixture.json");
    std::fs::write(&path, fixture.to_string())?;
    let (code, out, err) = cli(&["eval-loc", path.to_str().unwrap()], None);
    ensure!(code == 0, "eval-loc failed: {err}");
    Ok(serde_json::from_str(&out)?)
}

fn localization_harness() -> Result<()> {
    let ta = truth("a.cpp", 2, "    return 1;");
    let tb = truth("a.cpp", 5, "    return 2;");
    let tg = truth("b.cpp", 3, "    return 3;");
    // (id, truth, prediction, file hit, function hit), labeled by hand
    let labeled: Vec<(&str, String, Vec<&str>, bool, bool)> = vec![
        ("i01", ta.clone(), vec!["alpha"], true, true),
        ("i02", ta.clone(), vec!["beta"], true, false),
        ("i03", ta.clone(), vec!["n::gamma"], false, false),
        ("i04", tb.clone(), vec!["beta"], true, true),
        ("i05", tb.clone(), vec!["alpha", "n::gamma"], true, false),
        ("i06", tg.clone(), vec!["n::gamma"], true, true),
        ("i07", tg.clone(), vec!["alpha"], false, false),
        ("i08", tg.clone(), vec![], false, false),
        ("i09", tb.clone(), vec!["n"], false, false),
        ("i10", ta.clone(), vec!["alpha", "beta"], true, true),
    ];
    let fixture = eval_fixture(&labeled.iter().map(|(i, t, p, _, _)| (*i, t.clone(), p.clone())).collect::<Vec<_>>());
    let s = run_eval(&fixture)?;
    ensure!(s["file_rate"].as_f64() == Some(0.6), "{}", s["file_rate"]);
    ensure!(s["function_rate"].as_f64() == Some(0.4), "{}", s["function_rate"]);
    for (r, (id, _, _, fh, fnh)) in s["reports"].as_array().unwrap().iter().zip(&labeled) {
        ensure!(r["instance_id"] == *id && r["file_hit"] == *fh && r["function_hit"] == *fnh, "{r}");
    }

    let perfect = eval_fixture(&[
        ("p1", ta, vec!["alpha"]),
        ("p2", tb, vec!["beta"]),
        ("p3", tg, vec!["n::gamma"]),
    ]);
    let s = run_eval(&perfect)?;
    ensure!(s["file_rate"].as_f64() == Some(1.0) && s["function_rate"].as_f64() == Some(1.0));
    Ok(())
}

// ---- 9 ----

fn budgets() -> Result<()> {
    let cfg = Config::default();
    ensure!(cfg.selection.candidate_count == 10);
    let repo = Repository::from_files("/toy", toy_files()).unwrap();
    let issue = IssueDescription::new("answer", "");

    let passing: Vec<Action> = (0..30)
        .map(|i| Action::EmitTest {
            id: format!("t{i}"),
            command: "true".into(),
            timeout_seconds: 5,
            support_files: BTreeMap::new(),
        })
        .collect();
    let mut b = AgentBackend::scripted("r", passing, cfg.agents.reproducer_turns);
    match reproduce(&repo, &issue, &mut b, &cfg.runner, None) {
        Err(PipelineError::ReproductionFailed { turns, .. }) => ensure!(turns == 20, "reproducer used {turns}"),
        other => return Err(anyhow!("unexpected {other:?}")),
    }

    let idx = build_index(&repo);
    let ctx = ToolContext::new(&idx, None, &HashingProvider);
    let chatter: Vec<Action> = (0..80).map(|i| Action::Message { text: format!("thinking {i}") }).collect();
    let mut p = AgentBackend::scripted("p", chatter, cfg.agents.patcher_turns);
    let (repro, _) = toy_tests();
    let g = generate_candidates(&issue, &repro, &ctx, &cfg.retrieval, &mut p, cfg.selection.candidate_count)?;
    ensure!(g.turns == 50 && g.budget_exhausted && g.candidates.is_empty(), "patcher used {}", g.turns);
    Ok(())
}

// ---- 10 ----

fn random_request(rng: &mut ChaCha8Rng, c: &Corpus, i: usize) -> String {
    let names: Vec<&str> = c.symbols.iter().map(|s| s.name.as_str()).collect();
    let qns: Vec<&str> = c.symbols.iter().map(|s| s.qualified_name.as_str()).collect();
    let pick = |rng: &mut ChaCha8Rng| -> String {
        match rng.gen_range(0..4) {
            0 => names.choose(rng).copied().unwrap_or("x").to_string(),
            1 => qns.choose(rng).copied().unwrap_or("x").to_string(),
            2 => "Nope".into(),
            _ => "bad name!".into(),
        }
    };
    let id = format!("q{i}");
    if rng.gen_bool(0.05) {
        return match rng.gen_range(0..3) {
            0 => "this is not json".into(),
            1 => format!(r#"{{"request_id":"{id}","args":{{}}}}"#),
            _ => format!(r#"{{"request_id":"{id}","tool":"FindClass","args":"#),
        };
    }
    let tool = if rng.gen_bool(0.05) { "NoSuchTool" } else { *TOOLS.choose(rng).unwrap() };
    let args = match tool {
        "FindClass" => serde_json::json!({"name": pick(rng)}),
        "FindFunction" => serde_json::json!({"scope": if rng.gen_bool(0.5) { String::new() } else { pick(rng) }, "name": pick(rng)}),
        "GetInheritanceChain" => serde_json::json!({"class_name": pick(rng)}),
        "GetFunctionCalls" => serde_json::json!({"class_name": if rng.gen_bool(0.5) { String::new() } else { pick(rng) }, "function_name": pick(rng)}),
        "QueryCodeIntent" => serde_json::json!({"query": format!("{} {}", pick(rng), pick(rng)), "k": rng.gen_range(0..6)}),
        "GrepBaseline" => serde_json::json!({"pattern": pick(rng)}),
        "DefectSubgraph" => serde_json::json!({"seeds": [pick(rng), pick(rng)], "hop_limit": rng.gen_range(0..3)}),
        _ => serde_json::json!({}),
    };
    serde_json::json!({"request_id": id, "tool": tool, "args": args}).to_string()
}

fn server_conformance() -> Result<()> {
    let c = generate(&mut ChaCha8Rng::seed_from_u64(77), &CorpusConfig::default());
    let dir = tempfile::tempdir()?;
    let files: Vec<(&str, &str)> = c.files.iter().map(|(p, s)| (p.as_str(), s.as_str())).collect();
    write_tree(&dir.path().join("src"), &files);
    let idx_path = dir.path().join("c.idx");
    let (code, _, err) =
        cli(&["index", "--root", dir.path().join("src").to_str().unwrap(), "--out", idx_path.to_str().unwrap()], None);
    ensure!(code == 0, "index: {err}");

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let lines: Vec<String> = (0..1000).map(|i| random_request(&mut rng, &c, i)).collect();
    let container = load_container(&idx_path)?;
    let ctx = ToolContext::new(&container.structural, container.intent.as_ref(), &HashingProvider);
    let expected: Vec<String> = lines.iter().filter_map(|l| handle_line(&ctx, l)).map(|r| r.to_line()).collect();
    ensure!(expected.len() == 1000);
    ensure!(expected.iter().any(|e| e.contains("\"BadRequest\"")));
    ensure!(expected.iter().any(|e| e.contains("\"UnknownTool\"")));

    let (code, out, err) = cli(&["serve", "--index", idx_path.to_str().unwrap()], Some(&(lines.join("\n") + "\n")));
    ensure!(code == 0, "serve: {err}");
    let got: Vec<&str> = out.lines().collect();
    ensure!(got.len() == expected.len(), "{} responses", got.len());
    for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
        ensure!(g == e, "response {i} differs");
    }

    // responses depend only on the request, not on its position
    let mut shuffled = lines.clone();
    shuffled.shuffle(&mut rng);
    let (_, out2, _) = cli(&["serve", "--index", idx_path.to_str().unwrap()], Some(&(shuffled.join("\n") + "\n")));
    let a: BTreeSet<&str> = out.lines().collect();
    let b: BTreeSet<&str> = out2.lines().collect();
    ensure!(a == b, "shuffled run answered differently");
    Ok(())
}

type Criterion = (u32, &'static str, fn() -> Result<()>, Duration);

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        (1, "motivation scenario: grep vs find_class", motivation, Duration::from_secs(1)),
        (2, "structural oracle equivalence on 200 corpora", structural_equivalence, Duration::from_secs(60)),
        (3, "inheritance chains on 100 random DAGs", inheritance_dags, Duration::from_secs(10)),
        (4, "intent top-k equals exhaustive scan", intent_oracle, Duration::from_secs(10)),
        (5, "selection contract on the toy repository", algorithm_contract, Duration::from_secs(30)),
        (6, "pruning idempotence and order insensitivity", pruning_laws, Duration::from_secs(10)),
        (7, "pipeline CLI determinism over 3 runs", end_to_end_determinism, Duration::from_secs(30)),
        (8, "localization harness on hand-labeled fixture", localization_harness, Duration::from_secs(10)),
        (9, "turn budgets 20/50 and 10 candidates", budgets, Duration::from_secs(10)),
        (10, "server conformance over 1000 requests", server_conformance, Duration::from_secs(30)),
    ];
    let mut failed = Vec::new();
    for (n, name, check, limit) in criteria {
        let start = Instant::now();
        let result = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(p) => Err(anyhow!(
                "panicked: {}",
                p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
            )),
        };
        let took = start.elapsed();
        let result = result.and_then(|_| {
            if took <= limit {
                Ok(())
            } else {
                Err(anyhow!("took {took:?}, limit {limit:?}"))
            }
        });
        match &result {
            Ok(()) => println!("criterion {n:>2} PASS  {name} ({:.2}s)", took.as_secs_f64()),
            Err(e) => {
                println!("criterion {n:>2} FAIL  {name}: {e:#}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
