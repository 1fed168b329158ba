use serde::{Deserialize, Serialize};

/// A natural-language issue report plus the code identifiers it mentions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueDescription {
    pub title: String,
    pub body: String,
    pub mentioned_symbols: Vec<String>,
}

impl IssueDescription {
    pub fn new(title: impl Into<String>, body: impl Into<String>) -> IssueDescription {
        let title = title.into();
        let body = body.into();
        let mentioned_symbols = extract_symbols(&format!("{title}\n{body}"));
        IssueDescription {
            title,
            body,
            mentioned_symbols,
        }
    }

    /// Parses a markdown-ish issue file: the first non-empty line (minus any
    /// leading `#`) is the title, the remainder is the body.
    pub fn from_text(text: &str) -> IssueDescription {
        let mut lines = text.lines();
        let mut title = String::new();
        for line in lines.by_ref() {
            let t = line.trim();
            if !t.is_empty() {
                title = t.trim_start_matches('#').trim().to_string();
                break;
            }
        }
        let body: Vec<&str> = lines.collect();
        IssueDescription::new(title, body.join("\n").trim().to_string())
    }

    pub fn full_text(&self) -> String {
        if self.body.is_empty() {
            self.title.clone()
        } else {
            format!("{}\n{}", self.title, self.body)
        }
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

/// `A::B::c`, optionally with a leading `::`. A bare identifier also counts.
pub fn is_qualified_name(s: &str) -> bool {
    let s = s.strip_prefix("::").unwrap_or(s);
    !s.is_empty() && s.split("::").all(is_identifier)
}

/// Identifier and qualified-name tokens in order of first appearance.
///
/// Backtick spans are kept verbatim when they are themselves a (qualified)
/// name, after dropping a trailing call suffix such as `()` or `(int)`.
/// Otherwise their contents are tokenized like the surrounding text.
fn extract_symbols(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let push = |s: &str, out: &mut Vec<String>| {
        if is_qualified_name(s) && !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    };

    let mut rest = text;
    while let Some(open) = rest.find('`') {
        for tok in scan_names(&rest[..open]) {
            push(&tok, &mut out);
        }
        let after = &rest[open + 1..];
        let Some(close) = after.find('`') else {
            rest = after;
            break;
        };
        let span = after[..close].trim();
        let stem = match span.find('(') {
            Some(p) if span.ends_with(')') => &span[..p],
            _ => span,
        };
        if is_qualified_name(stem) {
            push(stem, &mut out);
        } else {
            for tok in scan_names(span) {
                push(&tok, &mut out);
            }
        }
        rest = &after[close + 1..];
    }
    for tok in scan_names(rest) {
        push(&tok, &mut out);
    }
    out
}

/// Maximal `ident(::ident)*` runs.
fn scan_names(text: &str) -> Vec<String> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let is_start = |b: u8| b == b'_' || b.is_ascii_alphabetic();
    let is_cont = |b: u8| b == b'_' || b.is_ascii_alphanumeric();
    while i < bytes.len() {
        let b = bytes[i];
        if is_start(b) && (i == 0 || !is_cont(bytes[i - 1])) {
            let start = i;
            loop {
                while i < bytes.len() && is_cont(bytes[i]) {
                    i += 1;
                }
                if i + 2 < bytes.len() && &bytes[i..i + 2] == b"::" && is_start(bytes[i + 2]) {
                    i += 2;
                    continue;
                }
                break;
            }
            out.push(text[start..i].to_string());
        } else if b.is_ascii_digit() {
            while i < bytes.len() && is_cont(bytes[i]) {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_identifiers_and_qualified_names() {
        let issue = IssueDescription::new(
            "Crash in UI::update",
            "Calling `Database::update()` after `reset` crashes; see 2nd frame.",
        );
        assert_eq!(
            issue.mentioned_symbols,
            ["Crash", "in", "UI::update", "Calling", "Database::update", "after", "reset", "crashes", "see", "frame"]
        );
        assert!(issue.mentioned_symbols.iter().all(|s| is_qualified_name(s)));
    }

    #[test]
    fn non_name_backtick_spans_are_tokenized() {
        let issue = IssueDescription::new("t", "`a + b` and `x->y()`");
        assert_eq!(issue.mentioned_symbols, ["t", "a", "b", "and", "x", "y"]);
    }

    #[test]
    fn grammar_checks() {
        assert!(is_identifier("_foo1"));
        assert!(!is_identifier("1foo"));
        assert!(!is_identifier(""));
        assert!(is_qualified_name("::a::b"));
        assert!(!is_qualified_name("a::"));
        assert!(!is_qualified_name("a b"));
    }

    #[test]
    fn from_text_splits_title() {
        let issue = IssueDescription::from_text("\n# Title here\nbody line\n");
        assert_eq!(issue.title, "Title here");
        assert_eq!(issue.body, "body line");
    }
}
