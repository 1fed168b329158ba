//! Agent backends: a turn-based exchange of observations and actions.
//!
//! A scripted backend replays a transcript, one record per turn. An external
//! backend is a child process speaking the same records as JSON lines: it
//! reads one observation per line on stdin and answers with one action per
//! line on stdout.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::protocol::ToolResponse;
use crate::repo::TestOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    /// Invoke a query tool. `expect` is the canned result recorded with a
    /// transcript; replay flags a divergence when the live result differs.
    ToolCall {
        tool: String,
        #[serde(default)]
        args: Map<String, Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Value>,
    },
    Message {
        text: String,
    },
    EmitTest {
        id: String,
        command: String,
        #[serde(default = "default_test_timeout")]
        timeout_seconds: u64,
        #[serde(default)]
        support_files: BTreeMap<String, String>,
    },
    EmitPatch {
        diff: String,
    },
    EmitScore {
        score: f64,
    },
    Stop,
}

fn default_test_timeout() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Observation {
    Start { role: String, issue: String, context: String },
    ToolResult { response: ToolResponse },
    TestResult { outcome: TestOutcome },
    PatchResult { accepted: bool, detail: String },
    JudgeRequest { issue: String, diff: String },
    Note { text: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend {id} failed: {message}")]
    Failed { id: String, message: String },
    #[error("invalid transcript line {line}: {message}")]
    BadTranscript { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    External,
}

/// Produces one action per turn. `Ok(None)` means the agent has nothing
/// more to say.
pub trait AgentDriver: Send {
    fn next_action(&mut self, observation: &Observation) -> Result<Option<Action>, String>;
}

/// Replays recorded actions in order, ignoring observations.
#[derive(Debug, Clone)]
pub struct ScriptedDriver {
    actions: Vec<Action>,
    pos: usize,
}

impl ScriptedDriver {
    pub fn new(actions: Vec<Action>) -> ScriptedDriver {
        ScriptedDriver { actions, pos: 0 }
    }
}

impl AgentDriver for ScriptedDriver {
    fn next_action(&mut self, _observation: &Observation) -> Result<Option<Action>, String> {
        let a = self.actions.get(self.pos).cloned();
        if a.is_some() {
            self.pos += 1;
        }
        Ok(a)
    }
}

/// A child process speaking JSON lines over stdio.
pub struct CommandDriver {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl CommandDriver {
    pub fn spawn(command: &str) -> std::io::Result<CommandDriver> {
        let mut child = Command::new("/bin/sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(CommandDriver { child, stdin, stdout })
    }
}

impl AgentDriver for CommandDriver {
    fn next_action(&mut self, observation: &Observation) -> Result<Option<Action>, String> {
        let line = serde_json::to_string(observation).map_err(|e| e.to_string())?;
        if writeln!(self.stdin, "{line}").and_then(|_| self.stdin.flush()).is_err() {
            return Ok(None);
        }
        let mut reply = String::new();
        loop {
            reply.clear();
            let n = self.stdout.read_line(&mut reply).map_err(|e| e.to_string())?;
            if n == 0 {
                return Ok(None);
            }
            if !reply.trim().is_empty() {
                break;
            }
        }
        serde_json::from_str(reply.trim()).map(Some).map_err(|e| format!("bad action {reply:?}: {e}"))
    }
}

impl Drop for CommandDriver {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One step of an agent conversation, kept for inspection and replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub turn: usize,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    /// For tool calls with a recorded expectation: whether the live result
    /// matched it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_expectation: Option<bool>,
}

pub struct AgentBackend {
    pub id: String,
    pub turn_budget: usize,
    pub kind: BackendKind,
    driver: Box<dyn AgentDriver>,
    turns_used: usize,
}

impl std::fmt::Debug for AgentBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgentBackend")
            .field("id", &self.id)
            .field("turn_budget", &self.turn_budget)
            .field("kind", &self.kind)
            .field("turns_used", &self.turns_used)
            .finish()
    }
}

impl AgentBackend {
    pub fn new(id: impl Into<String>, turn_budget: usize, kind: BackendKind, driver: Box<dyn AgentDriver>) -> AgentBackend {
        AgentBackend {
            id: id.into(),
            turn_budget: turn_budget.max(1),
            kind,
            driver,
            turns_used: 0,
        }
    }

    pub fn scripted(id: impl Into<String>, actions: Vec<Action>, turn_budget: usize) -> AgentBackend {
        AgentBackend::new(id, turn_budget, BackendKind::Scripted, Box::new(ScriptedDriver::new(actions)))
    }

    pub fn from_transcript(id: impl Into<String>, text: &str, turn_budget: usize) -> Result<AgentBackend, BackendError> {
        Ok(AgentBackend::scripted(id, parse_transcript(text)?, turn_budget))
    }

    pub fn from_transcript_file(id: impl Into<String>, path: &Path, turn_budget: usize) -> Result<AgentBackend, BackendError> {
        let id = id.into();
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Failed {
            id: id.clone(),
            message: format!("{}: {e}", path.display()),
        })?;
        AgentBackend::from_transcript(id, &text, turn_budget)
    }

    pub fn external(id: impl Into<String>, command: &str, turn_budget: usize) -> Result<AgentBackend, BackendError> {
        let id = id.into();
        let driver = CommandDriver::spawn(command).map_err(|e| BackendError::Failed {
            id: id.clone(),
            message: e.to_string(),
        })?;
        Ok(AgentBackend::new(id, turn_budget, BackendKind::External, Box::new(driver)))
    }

    pub fn turns_used(&self) -> usize {
        self.turns_used
    }

    pub fn budget_left(&self) -> bool {
        self.turns_used < self.turn_budget
    }

    /// Takes one turn. Callers check [`AgentBackend::budget_left`] first.
    pub fn step(&mut self, observation: &Observation) -> Result<Option<Action>, BackendError> {
        self.turns_used += 1;
        self.driver.next_action(observation).map_err(|message| BackendError::Failed {
            id: self.id.clone(),
            message,
        })
    }
}

/// Parses a JSON-lines transcript. Blank lines and lines starting with `#`
/// are skipped.
pub fn parse_transcript(text: &str) -> Result<Vec<Action>, BackendError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| BackendError::BadTranscript {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn render_transcript(actions: &[Action]) -> String {
    actions
        .iter()
        .map(|a| serde_json::to_string(a).expect("actions serialize") + "\n")
        .collect()
}
