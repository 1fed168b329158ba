//! Process-level test execution against a materialized snapshot.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::os::unix::process::CommandExt;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use super::Repository;

const EXCERPT_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestRole {
    Reproducer,
    Regression,
    Extra,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    /// Shell command, run with `/bin/sh -c` from the snapshot root.
    pub command: String,
    pub role: TestRole,
    pub timeout: Duration,
    /// Files written into the scratch copy before running (not part of the
    /// repository snapshot, never patched).
    #[serde(default)]
    pub support_files: BTreeMap<String, String>,
}

impl TestCase {
    pub fn new(
        id: impl Into<String>,
        command: impl Into<String>,
        role: TestRole,
        timeout: Duration,
    ) -> TestCase {
        TestCase {
            id: id.into(),
            command: command.into(),
            role,
            timeout,
            support_files: BTreeMap::new(),
        }
    }

    pub fn with_support_file(mut self, path: impl Into<String>, content: impl Into<String>) -> TestCase {
        self.support_files.insert(path.into(), content.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Pass,
    Fail,
    Error,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub status: TestStatus,
    /// Tail of combined stdout and stderr.
    pub stdout_excerpt: String,
    pub duration: Duration,
}

fn default_timeout_seconds() -> u64 {
    60
}

fn default_env_allowlist() -> Vec<String> {
    vec!["PATH".into(), "HOME".into(), "LANG".into()]
}

/// Isolation settings shared by every test run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerConfig {
    /// Default timeout for tests that do not carry their own.
    #[serde(default = "default_timeout_seconds")]
    pub timeout_seconds: u64,
    /// Environment variables passed through to test processes; everything
    /// else is cleared.
    #[serde(default = "default_env_allowlist")]
    pub env_allowlist: Vec<String>,
    /// Parent directory for per-run scratch copies (system temp if unset).
    #[serde(default)]
    pub scratch_root: Option<PathBuf>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            timeout_seconds: default_timeout_seconds(),
            env_allowlist: default_env_allowlist(),
            scratch_root: None,
        }
    }
}

impl RunnerConfig {
    pub fn default_timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_seconds.max(1))
    }
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("test runner unavailable: {0}")]
    RunnerUnavailable(String),
    #[error("could not materialize snapshot: {0}")]
    MaterializationFailed(String),
    #[error("invalid test {id}: {reason}")]
    InvalidTest { id: String, reason: String },
}

/// Runs one test against a fresh scratch copy of `repo`.
///
/// Every call gets its own scratch directory, so concurrent calls never share
/// state. A run that outlives `test.timeout` has its whole process group
/// killed and reports [`TestStatus::Timeout`].
pub fn run_test(
    repo: &Repository,
    test: &TestCase,
    runner: &RunnerConfig,
) -> Result<TestOutcome, RunnerError> {
    if test.timeout.is_zero() {
        return Err(RunnerError::InvalidTest {
            id: test.id.clone(),
            reason: "timeout must be positive".into(),
        });
    }
    let mut builder = tempfile::Builder::new();
    builder.prefix("cppscope-run-");
    let scratch = match &runner.scratch_root {
        Some(root) => {
            std::fs::create_dir_all(root)
                .map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;
            builder.tempdir_in(root)
        }
        None => builder.tempdir(),
    }
    .map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;

    let work = scratch.path().join("work");
    std::fs::create_dir_all(&work).map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;
    repo.materialize(&work)
        .map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;
    for (path, content) in &test.support_files {
        let target = work.join(path);
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;
        }
        std::fs::write(&target, content)
            .map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;
    }

    let log_path = scratch.path().join("output.log");
    let log = File::create(&log_path).map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;
    let log_err = log
        .try_clone()
        .map_err(|e| RunnerError::MaterializationFailed(e.to_string()))?;

    let mut cmd = Command::new("/bin/sh");
    cmd.arg("-c")
        .arg(&test.command)
        .current_dir(&work)
        .env_clear()
        .stdin(Stdio::null())
        .stdout(Stdio::from(log))
        .stderr(Stdio::from(log_err))
        .process_group(0);
    for key in &runner.env_allowlist {
        if let Ok(value) = std::env::var(key) {
            cmd.env(key, value);
        }
    }

    let started = Instant::now();
    let mut child = cmd
        .spawn()
        .map_err(|e| RunnerError::RunnerUnavailable(e.to_string()))?;
    let pgid = child.id() as libc::pid_t;
    let waited = child
        .wait_timeout(test.timeout)
        .map_err(|e| RunnerError::RunnerUnavailable(e.to_string()))?;
    let status = match waited {
        None => {
            kill_group(pgid);
            let _ = child.wait();
            TestStatus::Timeout
        }
        Some(exit) => {
            // Reap stray background processes the test may have left behind.
            kill_group(pgid);
            match exit.code() {
                Some(0) => TestStatus::Pass,
                Some(126 | 127) => TestStatus::Error,
                Some(_) => TestStatus::Fail,
                None => TestStatus::Error,
            }
        }
    };
    let duration = started.elapsed();

    let mut bytes = Vec::new();
    if let Ok(mut f) = File::open(&log_path) {
        let _ = f.read_to_end(&mut bytes);
    }
    let tail_start = bytes.len().saturating_sub(EXCERPT_BYTES);
    let stdout_excerpt = String::from_utf8_lossy(&bytes[tail_start..]).into_owned();

    Ok(TestOutcome {
        test_id: test.id.clone(),
        status,
        stdout_excerpt,
        duration,
    })
}

fn kill_group(pgid: libc::pid_t) {
    // SAFETY: signalling a process group we created; failure (ESRCH) is benign.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}
