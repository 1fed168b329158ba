//! Issue resolution end to end: reproduce, generate candidates, select.

pub mod agent;
mod generate;
mod prune;
mod reproduce;
mod select;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

pub use agent::{
    parse_transcript, render_transcript, Action, AgentBackend, AgentDriver, BackendError, BackendKind, CommandDriver,
    Observation, ScriptedDriver, TranscriptEntry,
};
pub use generate::{generate_candidates, localize_for, Generation};
pub use prune::{complexity, normalize, prune, HunkKey, NormalizedPatch};
pub use reproduce::{reproduce, verify_reproducer, Reproduction};
pub use select::{
    judge_score, select, touched_symbols, validate, vote_score, BaselineCache, RankedCandidate, RegressionDelta,
    SelectEnv, SelectionReport, ValidationVerdict, VoteBreakdown, VoteContext,
};

use crate::config::Config;
use crate::index::build_index_with;
use crate::intent::{build_intent_index_with, EmbeddingProvider, IntentError};
use crate::par::Execution;
use crate::protocol::{dispatch, ToolContext, ToolRequest, ToolResponse};
use crate::repo::{IssueDescription, PatchCandidate, Repository, RunnerError, TestCase, TestRole};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("reproduction failed after {turns} turns: {reason}")]
    ReproductionFailed { reason: String, turns: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Intent(#[from] IntentError),
    #[error("generation failed: {0}")]
    GenerationFailed(String),
}

/// Runs one tool call for an agent. Returns the observation and, when the
/// action carried a recorded result, whether the live result matched it.
pub(super) fn run_tool_call(
    tools: Option<&ToolContext<'_>>,
    request_id: &str,
    tool: &str,
    args: &Map<String, Value>,
    expect: Option<&Value>,
) -> (Observation, Option<bool>) {
    let response = match tools {
        Some(ctx) => dispatch(
            ctx,
            &ToolRequest {
                request_id: request_id.to_string(),
                tool: tool.to_string(),
                args: args.clone(),
            },
        ),
        None => ToolResponse::error(request_id, "Unavailable", "no index is loaded for this agent"),
    };
    let matched = expect.map(|e| {
        let payload = serde_json::to_value(&response.payload).unwrap_or(Value::Null);
        let whole = serde_json::to_value(&response).unwrap_or(Value::Null);
        *e == payload || *e == whole
    });
    if matched == Some(false) {
        log::warn!("tool call {request_id} ({tool}) diverged from the recorded result");
    }
    (Observation::ToolResult { response }, matched)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Reproduction,
    Generation,
    Selection,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Reproduction => "reproduction",
            Stage::Generation => "generation",
            Stage::Selection => "selection",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub reproducer: Option<TestCase>,
    pub reproduction_summary: Option<String>,
    pub generation: Option<Generation>,
    pub selection: Option<SelectionReport>,
    pub final_patch: Option<PatchCandidate>,
    pub failure: Option<StageFailure>,
}

impl PipelineReport {
    fn fail(mut self, stage: Stage, reason: impl Into<String>) -> PipelineReport {
        self.failure = Some(StageFailure {
            stage,
            reason: reason.into(),
        });
        self
    }
}

/// Agent backends for one run. Without a reproducer backend the manifest's
/// reproducer test is used (and still verified to fail).
#[derive(Debug, Default)]
pub struct Backends {
    pub reproducer: Option<AgentBackend>,
    pub patcher: Option<AgentBackend>,
    pub judge: Option<AgentBackend>,
}

pub struct PipelineInput<'a> {
    pub repo: &'a Repository,
    pub issue: &'a IssueDescription,
    /// Manifest tests; roles decide reproducer, regression and extra sets.
    pub tests: &'a [TestCase],
    pub config: &'a Config,
    pub provider: &'a dyn EmbeddingProvider,
    pub exec: Execution,
}

/// Runs reproduce, generate and select. Every failure is attributed to
/// the stage where it happened; the report is returned either way.
pub fn run_pipeline(input: &PipelineInput<'_>, backends: &mut Backends) -> PipelineReport {
    let mut report = PipelineReport {
        reproducer: None,
        reproduction_summary: None,
        generation: None,
        selection: None,
        final_patch: None,
        failure: None,
    };
    let cfg = input.config;
    let runner = &cfg.runner;

    let sidx = build_index_with(input.repo, input.exec);
    let iidx = match build_intent_index_with(input.repo, &sidx, input.provider, &cfg.retrieval.granularities, input.exec) {
        Ok(i) => Some(i),
        Err(e) => {
            log::warn!("intent index unavailable ({e}); localizing structurally only");
            None
        }
    };
    let mut tools = ToolContext::new(&sidx, iidx.as_ref(), input.provider);
    tools.default_k = cfg.retrieval.k;
    tools.default_hop_limit = cfg.retrieval.hop_limit;

    // reproduce
    let repro = match backends.reproducer.as_mut() {
        Some(b) => reproduce(input.repo, input.issue, b, runner, Some(&tools)).map(|r| (r.test, r.summary)),
        None => match input.tests.iter().find(|t| t.role == TestRole::Reproducer) {
            Some(t) => verify_reproducer(input.repo, t, runner).map(|s| (t.clone(), s)),
            None => Err(PipelineError::ReproductionFailed {
                reason: "no reproducer backend and no reproducer test in the manifest".into(),
                turns: 0,
            }),
        },
    };
    let (t_d, summary) = match repro {
        Ok(x) => x,
        Err(e) => return report.fail(Stage::Reproduction, e.to_string()),
    };
    report.reproducer = Some(t_d.clone());
    report.reproduction_summary = Some(summary);

    // generate
    let Some(patcher) = backends.patcher.as_mut() else {
        return report.fail(Stage::Generation, "no patch backend configured");
    };
    let generation = match generate_candidates(
        input.issue,
        &t_d,
        &tools,
        &cfg.retrieval,
        patcher,
        cfg.selection.candidate_count,
    ) {
        Ok(g) => g,
        Err(e) => return report.fail(Stage::Generation, e.to_string()),
    };
    let empty = generation.candidates.is_empty();
    report.generation = Some(generation);
    if empty {
        return report.fail(Stage::Generation, "the patch backend produced no well-formed candidates");
    }
    let generation = report.generation.as_ref().expect("set above");

    // select
    let regression: Vec<TestCase> = input
        .tests
        .iter()
        .filter(|t| t.role == TestRole::Regression && t.id != t_d.id)
        .cloned()
        .collect();
    let extra: Vec<TestCase> = input.tests.iter().filter(|t| t.role == TestRole::Extra).cloned().collect();
    let cache = BaselineCache::new();
    let env = SelectEnv {
        runner,
        cache: &cache,
        exec: input.exec,
    };
    let vote = VoteContext {
        issue: input.issue,
        localization: &generation.localization,
        index: &sidx,
        provider: input.provider,
        weights: cfg.selection.normalized_weights(),
    };
    let selection = select(
        input.repo,
        &regression,
        &t_d,
        &generation.candidates,
        &extra,
        &cfg.selection,
        &env,
        &vote,
        backends.judge.as_mut(),
    );
    match selection {
        Ok(sel) => {
            let reason = if sel.pruned.is_empty() {
                "every candidate was pruned as non-behavioral".to_string()
            } else {
                format!("none of {} distinct candidates passed validation", sel.pruned.len())
            };
            report.final_patch = sel.selected.clone();
            report.selection = Some(sel);
            if report.final_patch.is_none() {
                return report.fail(Stage::Selection, reason);
            }
            report
        }
        Err(e) => report.fail(Stage::Selection, e.to_string()),
    }
}
