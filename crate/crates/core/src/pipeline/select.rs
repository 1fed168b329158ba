//! Behavioral validation and final patch selection.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::agent::{Action, AgentBackend, Observation};
use super::prune::{complexity, prune, NormalizedPatch};
use crate::config::{SelectionConfig, Strategy};
use crate::index::{StructuralIndex, SymbolId};
use crate::intent::{cosine, EmbeddingProvider, LocalizationResult};
use crate::par::{self, Execution};
use crate::query::innermost_at;
use crate::repo::{
    apply_patch, run_test, IssueDescription, PatchCandidate, Repository, RunnerConfig, RunnerError, TestCase,
    TestOutcome, TestStatus,
};

/// Regression statuses on unpatched snapshots, keyed by
/// `(snapshot, test id, command)`.
#[derive(Debug, Default)]
pub struct BaselineCache {
    inner: Mutex<HashMap<(String, String, String), TestStatus>>,
}

impl BaselineCache {
    pub fn new() -> BaselineCache {
        BaselineCache::default()
    }

    fn key(repo: &Repository, test: &TestCase) -> (String, String, String) {
        (repo.snapshot_id.clone(), test.id.clone(), test.command.clone())
    }

    pub fn get(&self, repo: &Repository, test: &TestCase) -> Option<TestStatus> {
        self.inner.lock().expect("baseline cache poisoned").get(&Self::key(repo, test)).copied()
    }

    /// Cached status, running the test on a miss.
    pub fn status(&self, repo: &Repository, test: &TestCase, runner: &RunnerConfig) -> Result<TestStatus, RunnerError> {
        if let Some(s) = self.get(repo, test) {
            return Ok(s);
        }
        let status = run_test(repo, test, runner)?.status;
        self.inner
            .lock()
            .expect("baseline cache poisoned")
            .insert(Self::key(repo, test), status);
        Ok(status)
    }

    /// Runs every uncached test once.
    pub fn warm(&self, repo: &Repository, tests: &[TestCase], runner: &RunnerConfig, exec: Execution) -> Result<(), RunnerError> {
        let missing: Vec<&TestCase> = tests.iter().filter(|t| self.get(repo, t).is_none()).collect();
        for r in par::map(exec, &missing, |t| self.status(repo, t, runner)) {
            r?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("baseline cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionDelta {
    pub test_id: String,
    pub baseline: TestStatus,
    pub patched: TestStatus,
}

impl RegressionDelta {
    pub fn unchanged(&self) -> bool {
        self.baseline == self.patched
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    /// Source candidate id.
    pub candidate: String,
    /// `None` when the patch did not apply.
    pub reproducer_outcome: Option<TestOutcome>,
    pub regression_deltas: Vec<RegressionDelta>,
    pub extra_outcomes: Vec<TestOutcome>,
    pub valid: bool,
    pub reason: Option<String>,
}

/// Applies `candidate` and runs the reproducer, the regression tests and
/// the extra tests against the patched snapshot.
///
/// Regression tests must keep their baseline status; a test that failed
/// before may keep failing. The reproducer and every extra test must pass.
pub fn validate(
    repo: &Repository,
    candidate: &NormalizedPatch,
    reproducer: &TestCase,
    regression: &[TestCase],
    extra: &[TestCase],
    runner: &RunnerConfig,
    cache: &BaselineCache,
) -> Result<ValidationVerdict, RunnerError> {
    let patched = match apply_patch(repo, &candidate.to_candidate()) {
        Ok(p) => p,
        Err(e) => {
            return Ok(ValidationVerdict {
                candidate: candidate.source.clone(),
                reproducer_outcome: None,
                regression_deltas: Vec::new(),
                extra_outcomes: Vec::new(),
                valid: false,
                reason: Some(e.to_string()),
            })
        }
    };
    let repro = run_test(&patched, reproducer, runner)?;
    let mut deltas = Vec::with_capacity(regression.len());
    for t in regression {
        let baseline = cache.status(repo, t, runner)?;
        let patched_status = run_test(&patched, t, runner)?.status;
        deltas.push(RegressionDelta {
            test_id: t.id.clone(),
            baseline,
            patched: patched_status,
        });
    }
    let extras = extra
        .iter()
        .map(|t| run_test(&patched, t, runner))
        .collect::<Result<Vec<_>, _>>()?;

    let reason = if repro.status != TestStatus::Pass {
        Some(format!("reproducer {} is {:?} after patching", reproducer.id, repro.status))
    } else if let Some(d) = deltas.iter().find(|d| !d.unchanged()) {
        Some(format!("regression {} changed from {:?} to {:?}", d.test_id, d.baseline, d.patched))
    } else {
        extras
            .iter()
            .find(|o| o.status != TestStatus::Pass)
            .map(|o| format!("extra test {} is {:?}", o.test_id, o.status))
    };
    Ok(ValidationVerdict {
        candidate: candidate.source.clone(),
        reproducer_outcome: Some(repro),
        regression_deltas: deltas,
        extra_outcomes: extras,
        valid: reason.is_none(),
        reason,
    })
}

/// What vote scoring reads besides the candidate itself.
pub struct VoteContext<'a> {
    pub issue: &'a IssueDescription,
    pub localization: &'a LocalizationResult,
    /// Index of the unpatched repository.
    pub index: &'a StructuralIndex,
    pub provider: &'a dyn EmbeddingProvider,
    /// `(alignment, minimality, locality)`, summing to one.
    pub weights: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteBreakdown {
    pub alignment: f64,
    pub minimality: f64,
    pub locality: f64,
    pub score: f64,
    pub judged: bool,
}

/// Symbols of the pre-patch index whose innermost span covers a changed line.
pub fn touched_symbols(index: &StructuralIndex, patch: &NormalizedPatch) -> BTreeSet<SymbolId> {
    let mut out = BTreeSet::new();
    for f in &patch.files {
        let path = f.path();
        for h in &f.hunks {
            for line in h.changed_old_lines() {
                out.extend(innermost_at(index, path, line as u32));
            }
        }
    }
    out
}

fn alignment(ctx: &VoteContext<'_>, patch: &NormalizedPatch) -> f64 {
    let a = ctx.provider.embed(&patch.normalized_diff);
    let b = ctx.provider.embed(&ctx.issue.full_text());
    match (a, b) {
        (Ok(a), Ok(b)) => ((cosine(&a, &b) + 1.0) / 2.0).clamp(0.0, 1.0),
        _ => 0.5,
    }
}

/// Asks a judge backend for an alignment score in `[0, 1]`.
pub fn judge_score(judge: &mut AgentBackend, issue: &IssueDescription, diff: &str) -> Result<f64, String> {
    let mut obs = Observation::JudgeRequest {
        issue: issue.full_text(),
        diff: diff.to_string(),
    };
    while judge.budget_left() {
        match judge.step(&obs).map_err(|e| e.to_string())? {
            Some(Action::EmitScore { score }) if (0.0..=1.0).contains(&score) => return Ok(score),
            Some(Action::EmitScore { score }) => return Err(format!("judge score {score} outside [0, 1]")),
            Some(Action::Stop) | None => return Err("judge stopped without a score".into()),
            Some(_) => {
                obs = Observation::Note {
                    text: "the judge may only emit a score".into(),
                }
            }
        }
    }
    Err("judge turn budget exhausted".into())
}

/// Weighted sum of issue alignment, minimality and locality.
pub fn vote_score(ctx: &VoteContext<'_>, patch: &NormalizedPatch, judge: Option<&mut AgentBackend>) -> VoteBreakdown {
    let (alignment, judged) = match judge {
        Some(j) => match judge_score(j, ctx.issue, &patch.normalized_diff) {
            Ok(s) => (s, true),
            Err(e) => {
                log::warn!("judge {} failed ({e}); using the embedding alignment", j.id);
                (alignment(ctx, patch), false)
            }
        },
        None => (alignment(ctx, patch), false),
    };
    let minimality = 1.0 / (1.0 + complexity(patch) as f64);
    let touched = touched_symbols(ctx.index, patch);
    let hit = touched.intersection(&ctx.localization.intersection).count();
    let locality = hit as f64 / touched.len().max(1) as f64;
    let [wa, wm, wl] = ctx.weights;
    VoteBreakdown {
        alignment,
        minimality,
        locality,
        score: wa * alignment + wm * minimality + wl * locality,
        judged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub source: String,
    pub complexity: u64,
    pub vote: Option<VoteBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub strategy: Strategy,
    pub pruned: Vec<NormalizedPatch>,
    pub verdicts: Vec<ValidationVerdict>,
    /// Valid candidates only.
    pub ranking: Vec<RankedCandidate>,
    /// `None` is FAILURE: no candidate survived validation.
    pub selected: Option<PatchCandidate>,
}

/// Runner settings shared by all validations of one selection.
pub struct SelectEnv<'a> {
    pub runner: &'a RunnerConfig,
    pub cache: &'a BaselineCache,
    pub exec: Execution,
}

const SCORE_EPS: f64 = 1e-9;

/// Prunes, validates and picks one candidate.
///
/// Validations run concurrently; the reduction is sequential. Under
/// [`Strategy::Vote`] scores within `1e-9` of each other tie and fall back
/// to lower complexity, then smaller id. Returns the original candidate the
/// winning normal form came from.
#[allow(clippy::too_many_arguments)]
pub fn select(
    repo: &Repository,
    regression: &[TestCase],
    reproducer: &TestCase,
    candidates: &[PatchCandidate],
    extra: &[TestCase],
    config: &SelectionConfig,
    env: &SelectEnv<'_>,
    vote: &VoteContext<'_>,
    mut judge: Option<&mut AgentBackend>,
) -> Result<SelectionReport, RunnerError> {
    let pruned = prune(candidates);
    env.cache.warm(repo, regression, env.runner, env.exec)?;
    let verdicts = par::map(env.exec, &pruned, |np| {
        validate(repo, np, reproducer, regression, extra, env.runner, env.cache)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let mut valid: Vec<(&NormalizedPatch, u64)> = pruned
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| v.valid)
        .map(|(p, _)| (p, complexity(p)))
        .collect();
    valid.sort_by(|a, b| (a.1, &a.0.source).cmp(&(b.1, &b.0.source)));

    let ranking: Vec<RankedCandidate> = valid
        .iter()
        .map(|(p, c)| RankedCandidate {
            source: p.source.clone(),
            complexity: *c,
            vote: match config.strategy {
                Strategy::Vote => Some(vote_score(vote, p, judge.as_deref_mut())),
                Strategy::MinComplexity => None,
            },
        })
        .collect();

    // `ranking` is ordered by (complexity, id), so the first entry wins
    // every tie and is already the complexity argmin.
    let mut best: Option<&RankedCandidate> = None;
    for r in &ranking {
        best = match best {
            None => Some(r),
            Some(b) => {
                let (rs, bs) = (r.vote.as_ref().map_or(0.0, |v| v.score), b.vote.as_ref().map_or(0.0, |v| v.score));
                if config.strategy == Strategy::Vote && rs > bs + SCORE_EPS {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        };
    }
    let selected = best.and_then(|b| candidates.iter().find(|c| c.id == b.source).cloned());
    Ok(SelectionReport {
        strategy: config.strategy,
        pruned,
        verdicts,
        ranking,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::build_index;
    use crate::intent::HashingProvider;
    use crate::query::DefectSubgraph;
    use crate::repo::{parse_unified_diff, TestRole};
    use std::time::Duration;

    fn repo() -> Repository {
        Repository::from_files(
            "/toy",
            [
                ("value.txt", "1\n"),
                ("other.txt", "ok\n"),
                ("calc.cpp", "int value() {\n    return 1;\n}\n\nint other() {\n    return 0;\n}\n"),
            ],
        )
        .unwrap()
    }

    fn test(id: &str, cmd: &str, role: TestRole) -> TestCase {
        TestCase::new(id, cmd, role, Duration::from_secs(10))
    }

    fn diff(path: &str, old: &str, new: &str) -> PatchCandidate {
        parse_unified_diff(&format!("--- a/{path}\n+++ b/{path}\n@@ -1,1 +1,1 @@\n-{old}\n+{new}\n")).unwrap()
    }

    fn loc(ids: &[SymbolId]) -> LocalizationResult {
        LocalizationResult {
            intent_hits: Vec::new(),
            subgraph: DefectSubgraph {
                seeds: Vec::new(),
                members: ids.iter().copied().collect(),
                hop_limit: 2,
            },
            intersection: ids.iter().copied().collect(),
            fallback_used: false,
        }
    }

    #[test]
    fn validation_outcomes() {
        let r = repo();
        let runner = RunnerConfig::default();
        let cache = BaselineCache::new();
        let repro = test("repro", "grep -qx 2 value.txt", TestRole::Reproducer);
        let regs = [
            test("other", "grep -qx ok other.txt", TestRole::Regression),
            test("broken", "exit 1", TestRole::Regression),
        ];
        let fix = prune(&[diff("value.txt", "1", "2")]).remove(0);
        let v = validate(&r, &fix, &repro, &regs, &[], &runner, &cache).unwrap();
        assert!(v.valid, "{v:?}");
        assert_eq!(v.regression_deltas[1].baseline, TestStatus::Fail);
        assert_eq!(cache.len(), 2);

        let nofix = prune(&[diff("value.txt", "1", "3")]).remove(0);
        assert!(!validate(&r, &nofix, &repro, &regs, &[], &runner, &cache).unwrap().valid);

        let breaks = prune(&[diff("other.txt", "ok", "bad"), diff("value.txt", "1", "2")]);
        let both = PatchCandidate::from_file_patches(
            breaks.iter().flat_map(|n| n.files.clone()).collect(),
            crate::repo::PatchOrigin::Agent,
        );
        let both = prune(&[both]).remove(0);
        let v = validate(&r, &both, &repro, &regs, &[], &runner, &cache).unwrap();
        assert!(!v.valid);
        assert!(v.reason.unwrap().contains("other"));

        let stale = prune(&[diff("value.txt", "9", "2")]).remove(0);
        let v = validate(&r, &stale, &repro, &regs, &[], &runner, &cache).unwrap();
        assert!(!v.valid && v.reproducer_outcome.is_none());

        let extra = [test("x", "exit 1", TestRole::Extra)];
        assert!(!validate(&r, &fix, &repro, &regs, &extra, &runner, &cache).unwrap().valid);
    }

    #[test]
    fn locality_and_minimality_terms() {
        let r = repo();
        let idx = build_index(&r);
        let value = idx.symbols.iter().find(|s| s.name == "value").unwrap().symbol_id;
        let p = prune(&[parse_unified_diff(
            "--- a/calc.cpp\n+++ b/calc.cpp\n@@ -2,1 +2,1 @@\n-    return 1;\n+    return 2;\n",
        )
        .unwrap()])
        .remove(0);
        let issue = IssueDescription::new("value returns 1", "");
        let inside = loc(&[value]);
        let ctx = VoteContext {
            issue: &issue,
            localization: &inside,
            index: &idx,
            provider: &HashingProvider,
            weights: [0.0, 0.5, 0.5],
        };
        let b = vote_score(&ctx, &p, None);
        assert_eq!(b.locality, 1.0);
        assert!((b.minimality - 1.0 / 13.0).abs() < 1e-12);
        assert!((b.score - (0.5 / 13.0 + 0.5)).abs() < 1e-12);
        let outside = loc(&[]);
        let ctx = VoteContext { localization: &outside, ..ctx };
        assert_eq!(vote_score(&ctx, &p, None).locality, 0.0);
    }

    #[test]
    fn judge_replaces_alignment() {
        let r = repo();
        let idx = build_index(&r);
        let p = prune(&[diff("value.txt", "1", "2")]).remove(0);
        let issue = IssueDescription::new("t", "b");
        let l = loc(&[]);
        let ctx = VoteContext {
            issue: &issue,
            localization: &l,
            index: &idx,
            provider: &HashingProvider,
            weights: [1.0, 0.0, 0.0],
        };
        let mut judge = AgentBackend::scripted("j", vec![Action::EmitScore { score: 0.25 }], 1);
        let b = vote_score(&ctx, &p, Some(&mut judge));
        assert!(b.judged);
        assert_eq!(b.score, 0.25);
        let mut bad = AgentBackend::scripted("j", vec![Action::EmitScore { score: 3.0 }], 1);
        let b = vote_score(&ctx, &p, Some(&mut bad));
        assert!(!b.judged);
        assert!((0.0..=1.0).contains(&b.score));
    }

    #[test]
    fn select_strategies() {
        let r = repo();
        let idx = build_index(&r);
        let runner = RunnerConfig::default();
        let repro = test("repro", "grep -qx 2 value.txt", TestRole::Reproducer);
        let small = diff("value.txt", "1", "2");
        // same fix plus an unrelated comment file: 2 files, more lines
        let big = parse_unified_diff(
            "--- a/value.txt\n+++ b/value.txt\n@@ -1,1 +1,1 @@\n-1\n+2\n--- a/other.txt\n+++ b/other.txt\n@@ -1,1 +1,3 @@\n ok\n+a\n+b\n",
        )
        .unwrap();
        let wrong = diff("value.txt", "1", "5");
        let issue = IssueDescription::new("value", "");
        let l = loc(&[]);
        let vote = VoteContext {
            issue: &issue,
            localization: &l,
            index: &idx,
            provider: &HashingProvider,
            weights: [0.0, 1.0, 0.0],
        };
        let cache = BaselineCache::new();
        let env = SelectEnv {
            runner: &runner,
            cache: &cache,
            exec: Execution::Sequential,
        };
        for strategy in [Strategy::Vote, Strategy::MinComplexity] {
            let cfg = SelectionConfig {
                strategy,
                ..Default::default()
            };
            let rep = select(&r, &[], &repro, &[big.clone(), wrong.clone(), small.clone()], &[], &cfg, &env, &vote, None).unwrap();
            assert_eq!(rep.ranking.len(), 2);
            assert_eq!(rep.ranking[0].complexity, 12);
            assert_eq!(rep.ranking[1].complexity, 24);
            assert_eq!(rep.selected.as_ref().unwrap().id, small.id);
        }
        let cfg = SelectionConfig::default();
        let rep = select(&r, &[], &repro, &[wrong], &[], &cfg, &env, &vote, None).unwrap();
        assert!(rep.selected.is_none());
    }
}
