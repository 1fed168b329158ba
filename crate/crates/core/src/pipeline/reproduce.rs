use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::agent::{Action, AgentBackend, Observation, TranscriptEntry};
use super::{run_tool_call, PipelineError};
use crate::protocol::ToolContext;
use crate::repo::{run_test, IssueDescription, Repository, RunnerConfig, TestCase, TestRole, TestStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub test: TestCase,
    /// Status and output tail of the failing run.
    pub summary: String,
    pub turns: usize,
    pub transcript: Vec<TranscriptEntry>,
}

pub(super) fn summarize(test: &TestCase, status: TestStatus, excerpt: &str) -> String {
    format!(
        "reproducer {} (`{}`) on the unpatched repository: status={status:?}\n--- output ---\n{excerpt}",
        test.id, test.command
    )
}

/// Confirms that a test fails on the unpatched repository.
pub fn verify_reproducer(repo: &Repository, test: &TestCase, runner: &RunnerConfig) -> Result<String, PipelineError> {
    let outcome = run_test(repo, test, runner)?;
    if outcome.status == TestStatus::Fail {
        Ok(summarize(test, outcome.status, &outcome.stdout_excerpt))
    } else {
        Err(PipelineError::ReproductionFailed {
            reason: format!("reproducer {} does not fail before patching (status {:?})", test.id, outcome.status),
            turns: 0,
        })
    }
}

/// Drives the reproducer agent until it emits a test that fails on `repo`.
///
/// Emitted tests that pass, error or time out are reported back to the agent
/// and the loop continues while turns remain.
pub fn reproduce(
    repo: &Repository,
    issue: &IssueDescription,
    backend: &mut AgentBackend,
    runner: &RunnerConfig,
    tools: Option<&ToolContext<'_>>,
) -> Result<Reproduction, PipelineError> {
    let mut transcript = Vec::new();
    let mut observation = Observation::Start {
        role: "reproducer".into(),
        issue: issue.full_text(),
        context: String::new(),
    };
    let mut last_problem = String::from("backend stopped without emitting a failing test");
    while backend.budget_left() {
        let turn = backend.turns_used() + 1;
        let Some(action) = backend.step(&observation)? else {
            return Err(PipelineError::ReproductionFailed {
                reason: last_problem,
                turns: backend.turns_used(),
            });
        };
        let mut matched = None;
        let next = match &action {
            Action::ToolCall { tool, args, expect } => {
                let (obs, m) = run_tool_call(tools, &format!("r{turn}"), tool, args, expect.as_ref());
                matched = m;
                obs
            }
            Action::EmitTest {
                id,
                command,
                timeout_seconds,
                support_files,
            } => {
                let mut test = TestCase::new(
                    id.clone(),
                    command.clone(),
                    TestRole::Reproducer,
                    Duration::from_secs((*timeout_seconds).max(1)),
                );
                test.support_files = support_files.clone();
                let outcome = run_test(repo, &test, runner)?;
                if outcome.status == TestStatus::Fail {
                    let summary = summarize(&test, outcome.status, &outcome.stdout_excerpt);
                    transcript.push(TranscriptEntry {
                        turn,
                        action,
                        observation: Some(Observation::TestResult { outcome }),
                        matched_expectation: None,
                    });
                    return Ok(Reproduction {
                        test,
                        summary,
                        turns: backend.turns_used(),
                        transcript,
                    });
                }
                last_problem = format!(
                    "emitted test {} did not fail on the unpatched repository (status {:?})",
                    test.id, outcome.status
                );
                Observation::TestResult { outcome }
            }
            Action::Stop => {
                transcript.push(TranscriptEntry {
                    turn,
                    action,
                    observation: None,
                    matched_expectation: None,
                });
                return Err(PipelineError::ReproductionFailed {
                    reason: last_problem,
                    turns: backend.turns_used(),
                });
            }
            Action::Message { .. } => Observation::Note { text: "continue".into() },
            Action::EmitPatch { .. } | Action::EmitScore { .. } => Observation::Note {
                text: "the reproducer may only emit tests".into(),
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
    Err(PipelineError::ReproductionFailed {
        reason: format!("turn budget of {} exhausted", backend.turn_budget),
        turns: backend.turns_used(),
    })
}
