use serde::{Deserialize, Serialize};

use super::agent::{Action, AgentBackend, Observation, TranscriptEntry};
use super::{run_tool_call, PipelineError};
use crate::config::RetrievalConfig;
use crate::intent::{localize, localize_issue, LocalizationResult};
use crate::protocol::ToolContext;
use crate::query::{defect_subgraph, DefectSubgraph};
use crate::repo::{parse_unified_diff, IssueDescription, PatchCandidate, PatchOrigin, TestCase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    /// In emission order.
    pub candidates: Vec<PatchCandidate>,
    pub localization: LocalizationResult,
    pub transcript: Vec<TranscriptEntry>,
    /// One message per dropped malformed diff.
    pub rejected: Vec<String>,
    pub turns: usize,
    pub budget_exhausted: bool,
}

/// Runs `query_code_intent -> defect_subgraph -> localize` for an issue.
pub fn localize_for(
    tools: &ToolContext<'_>,
    issue: &IssueDescription,
    retrieval: &RetrievalConfig,
) -> Result<LocalizationResult, PipelineError> {
    match tools.intent {
        Some(iidx) => Ok(localize_issue(
            tools.index,
            iidx,
            tools.provider,
            issue,
            retrieval.k,
            retrieval.hop_limit,
            retrieval.fallback,
        )?),
        None => {
            let subgraph = defect_subgraph(tools.index, &issue.mentioned_symbols, retrieval.hop_limit).unwrap_or(
                DefectSubgraph {
                    seeds: Vec::new(),
                    members: Default::default(),
                    hop_limit: retrieval.hop_limit,
                },
            );
            Ok(localize(tools.index, Vec::new(), subgraph, retrieval.fallback))
        }
    }
}

fn render_context(tools: &ToolContext<'_>, loc: &LocalizationResult, reproducer: &TestCase) -> String {
    let mut out = format!("reproducer: {} (`{}`)\nlocalized symbols:", reproducer.id, reproducer.command);
    for id in &loc.intersection {
        if let Some(s) = tools.index.symbol(*id) {
            out.push_str(&format!(
                "\n  {} {}{} at {}:{}-{}",
                s.kind, s.qualified_name, s.signature, s.location.path, s.location.start_line, s.location.end_line
            ));
        }
    }
    if loc.fallback_used {
        out.push_str("\n(intent hits only; no overlap with the defect subgraph)");
    }
    out
}

/// Runs the patch agent's tool loop and collects up to `n` well-formed
/// candidate diffs. Localization happens before the first turn and is
/// passed to the agent as initial context.
pub fn generate_candidates(
    issue: &IssueDescription,
    reproducer: &TestCase,
    tools: &ToolContext<'_>,
    retrieval: &RetrievalConfig,
    backend: &mut AgentBackend,
    n: usize,
) -> Result<Generation, PipelineError> {
    let n = n.max(1);
    let localization = localize_for(tools, issue, retrieval)?;
    let mut observation = Observation::Start {
        role: "patcher".into(),
        issue: issue.full_text(),
        context: render_context(tools, &localization, reproducer),
    };
    let mut candidates: Vec<PatchCandidate> = Vec::new();
    let mut rejected = Vec::new();
    let mut transcript = Vec::new();
    let mut stopped = false;
    while candidates.len() < n && backend.budget_left() {
        let turn = backend.turns_used() + 1;
        let Some(action) = backend.step(&observation)? else {
            stopped = true;
            break;
        };
        let mut matched = None;
        let next = match &action {
            Action::ToolCall { tool, args, expect } => {
                let (obs, m) = run_tool_call(Some(tools), &format!("g{turn}"), tool, args, expect.as_ref());
                matched = m;
                obs
            }
            Action::EmitPatch { diff } => match parse_unified_diff(diff) {
                Ok(mut c) if !c.files.is_empty() => {
                    c.origin = PatchOrigin::Agent;
                    let detail = format!("accepted candidate {}", c.id);
                    candidates.push(c);
                    Observation::PatchResult { accepted: true, detail }
                }
                Ok(_) => {
                    let msg = "MalformedDiff: no file headers".to_string();
                    rejected.push(msg.clone());
                    Observation::PatchResult {
                        accepted: false,
                        detail: msg,
                    }
                }
                Err(e) => {
                    let msg = format!("MalformedDiff: {e}");
                    rejected.push(msg.clone());
                    Observation::PatchResult {
                        accepted: false,
                        detail: msg,
                    }
                }
            },
            Action::Stop => {
                transcript.push(TranscriptEntry {
                    turn,
                    action,
                    observation: None,
                    matched_expectation: None,
                });
                stopped = true;
                break;
            }
            Action::Message { .. } => Observation::Note { text: "continue".into() },
            Action::EmitTest { .. } | Action::EmitScore { .. } => Observation::Note {
                text: "the patcher may only emit patches".into(),
            },
        };
        transcript.push(TranscriptEntry {
            turn,
            action,
            observation: Some(next.clone()),
            matched_expectation: matched,
        });
        observation = next;
    }
    let budget_exhausted = !stopped && candidates.len() < n && !backend.budget_left();
    Ok(Generation {
        candidates,
        localization,
        transcript,
        rejected,
        turns: backend.turns_used(),
        budget_exhausted,
    })
}
