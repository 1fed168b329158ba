use std::io::Write;
use std::process::{Command, Stdio};

use thiserror::Error;

pub const HASHING_PROVIDER_ID: &str = "hashing-256";
pub const HASHING_DIMENSION: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmbedError {
    #[error("cannot embed text without word tokens")]
    EmptyText,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("embedding provider returned an invalid vector: {0}")]
    BadVector(String),
}

/// Turns text into a unit-length vector of fixed dimension.
pub trait EmbeddingProvider: Sync {
    fn id(&self) -> &str;
    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
}

/// Lowercased ASCII alphanumeric runs.
pub fn word_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic offline provider: feature hashing of word tokens into 256
/// buckets, term frequencies scaled by the largest count, then L2-normalized.
///
/// Scaling by the maximum count first makes repeated text (`"a a"` versus
/// `"a"`) produce bit-identical vectors, not merely parallel ones.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashingProvider;

impl EmbeddingProvider for HashingProvider {
    fn id(&self) -> &str {
        HASHING_PROVIDER_ID
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let mut counts = [0u64; HASHING_DIMENSION];
        for tok in word_tokens(text) {
            counts[(fnv1a(tok.as_bytes()) % HASHING_DIMENSION as u64) as usize] += 1;
        }
        let max = counts.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return Err(EmbedError::EmptyText);
        }
        let tf: Vec<f64> = counts.iter().map(|&c| c as f64 / max as f64).collect();
        normalize(tf)
    }
}

/// Scales `v` to unit length.
pub fn normalize(v: Vec<f64>) -> Result<Vec<f64>, EmbedError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::BadVector("non-finite component".into()));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(EmbedError::BadVector("zero vector".into()));
    }
    Ok(v.into_iter().map(|x| x / norm).collect())
}

/// Dot product of two unit vectors, clamped against rounding drift.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot.clamp(-1.0, 1.0)
}

/// External provider reached through a shell command: the text goes to
/// stdin, a list of decimals (separated by commas or whitespace, optionally
/// bracketed) comes back on stdout.
#[derive(Debug, Clone)]
pub struct CommandProvider {
    pub id: String,
    pub command: String,
}

impl CommandProvider {
    pub fn new(id: impl Into<String>, command: impl Into<String>) -> CommandProvider {
        CommandProvider {
            id: id.into(),
            command: command.into(),
        }
    }
}

pub fn parse_vector(out: &str) -> Result<Vec<f64>, EmbedError> {
    let trimmed = out.trim().trim_start_matches('[').trim_end_matches(']');
    let v: Vec<f64> = trimmed
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| EmbedError::BadVector(format!("{s:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(EmbedError::BadVector("empty output".into()));
    }
    Ok(v)
}

impl EmbeddingProvider for CommandProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        if text.trim().is_empty() {
            return Err(EmbedError::EmptyText);
        }
        let unavailable = |e: std::io::Error| EmbedError::ProviderUnavailable(format!("{}: {e}", self.command));
        let mut child = Command::new("/bin/sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(unavailable)?;
        if let Some(mut stdin) = child.stdin.take() {
            // A provider may legitimately stop reading early.
            let _ = stdin.write_all(text.as_bytes());
        }
        let out = child.wait_with_output().map_err(unavailable)?;
        if !out.status.success() {
            return Err(EmbedError::ProviderUnavailable(format!(
                "{} exited with {}",
                self.command, out.status
            )));
        }
        normalize(parse_vector(&String::from_utf8_lossy(&out.stdout))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hashing_is_unit_and_repetition_invariant() {
        let p = HashingProvider;
        let a = p.embed("alpha alpha").unwrap();
        let b = p.embed("alpha").unwrap();
        assert_eq!(a, b);
        let v = p.embed("Locate components for data serialization").unwrap();
        assert_eq!(v.len(), HASHING_DIMENSION);
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-12);
        assert_eq!(p.embed("  ,;: "), Err(EmbedError::EmptyText));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn command_provider() {
        let p = CommandProvider::new("ext", "cat >/dev/null; echo '[3, 4]'");
        assert_eq!(p.embed("x").unwrap(), vec![0.6, 0.8]);
        let bad = CommandProvider::new("ext", "exit 3");
        assert!(matches!(bad.embed("x"), Err(EmbedError::ProviderUnavailable(_))));
        let junk = CommandProvider::new("ext", "echo nope");
        assert!(matches!(junk.embed("x"), Err(EmbedError::BadVector(_))));
    }
}
