use super::is_keyword;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokKind,
    pub text: &'a str,
    pub line: u32,
    pub col: u32,
}

impl Token<'_> {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    /// An identifier that is not a reserved word.
    pub fn is_name(&self) -> bool {
        self.kind == TokKind::Ident && !is_keyword(self.text)
    }

    pub fn is_wordlike(&self) -> bool {
        matches!(self.kind, TokKind::Ident | TokKind::Number)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub start_line: u32,
    pub end_line: u32,
    /// Comment body without delimiters.
    pub text: String,
    /// True when code precedes the comment on its first line.
    pub trailing: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Lexed<'a> {
    pub tokens: Vec<Token<'a>>,
    pub comments: Vec<Comment>,
    pub includes: Vec<String>,
    pub last_line: u32,
}

// Longest first. `>>` is deliberately absent so nested template argument
// lists close one `>` at a time.
const PUNCTS: &[&str] = &[
    "<<=", "<=>", "->*", "...", "::", "->", "&&", "||", "==", "!=", "<=", ">=", "++", "--",
    "<<", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", ".*",
];

#[allow(unused_assignments)]
pub fn lex(src: &str) -> Lexed<'_> {
    let bytes = src.as_bytes();
    let mut out = Lexed::default();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut line_start = 0usize;
    // Whether anything but whitespace has appeared on the current line.
    let mut code_on_line = false;

    macro_rules! newline {
        () => {{
            line += 1;
            line_start = i + 1;
            code_on_line = false;
        }};
    }

    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b'\n' => {
                newline!();
                i += 1;
            }
            b' ' | b'\t' | b'\r' | 0x0c | 0x0b => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                let start_line = line;
                let start = i + 2;
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                out.comments.push(Comment {
                    start_line,
                    end_line: start_line,
                    text: src[start..i].trim().to_string(),
                    trailing: code_on_line,
                });
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                let start_line = line;
                let trailing = code_on_line;
                let start = i + 2;
                i += 2;
                let mut end = bytes.len();
                while i < bytes.len() {
                    if bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/') {
                        end = i;
                        i += 2;
                        break;
                    }
                    if bytes[i] == b'\n' {
                        newline!();
                    }
                    i += 1;
                }
                let body = &src[start..end.min(src.len())];
                let text = body
                    .lines()
                    .map(|l| l.trim().trim_start_matches('*').trim())
                    .filter(|l| !l.is_empty())
                    .collect::<Vec<_>>()
                    .join(" ");
                out.comments.push(Comment {
                    start_line,
                    end_line: line,
                    text,
                    trailing,
                });
                code_on_line = trailing;
            }
            b'#' if !code_on_line => {
                let start = i;
                // Directive runs to end of line, honouring backslash continuation.
                while i < bytes.len() {
                    if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                        i += 2;
                        line += 1;
                        line_start = i;
                        continue;
                    }
                    if bytes[i] == b'\n' {
                        break;
                    }
                    // Comments inside directives end them for our purposes.
                    if bytes[i] == b'/' && matches!(bytes.get(i + 1), Some(b'/') | Some(b'*')) {
                        break;
                    }
                    i += 1;
                }
                let directive = src[start + 1..i].trim_start();
                if let Some(rest) = directive.strip_prefix("include") {
                    let rest = rest.trim();
                    let target = rest
                        .trim_start_matches(['<', '"'])
                        .trim_end_matches(['>', '"']);
                    if !target.is_empty() {
                        out.includes.push(target.to_string());
                    }
                }
            }
            b'"' => {
                let start = i;
                let start_line = line;
                let col = (i - line_start + 1) as u32;
                i = skip_string(bytes, i, b'"', &mut line, &mut line_start);
                push(&mut out, TokKind::Str, &src[start..i], start_line, col);
                code_on_line = true;
            }
            b'\'' => {
                let start = i;
                let start_line = line;
                let col = (i - line_start + 1) as u32;
                i = skip_string(bytes, i, b'\'', &mut line, &mut line_start);
                push(&mut out, TokKind::Char, &src[start..i], start_line, col);
                code_on_line = true;
            }
            b'0'..=b'9' => {
                let start = i;
                let col = (i - line_start + 1) as u32;
                i = skip_number(bytes, i);
                push(&mut out, TokKind::Number, &src[start..i], line, col);
                code_on_line = true;
            }
            b'.' if bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let start = i;
                let col = (i - line_start + 1) as u32;
                i = skip_number(bytes, i + 1);
                push(&mut out, TokKind::Number, &src[start..i], line, col);
                code_on_line = true;
            }
            b if b == b'_' || b.is_ascii_alphabetic() || b >= 0x80 => {
                let start = i;
                let col = (i - line_start + 1) as u32;
                while i < bytes.len()
                    && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric() || bytes[i] >= 0x80)
                {
                    i += 1;
                }
                let word = &src[start..i];
                let start_line = line;
                if bytes.get(i) == Some(&b'"') && matches!(word, "R" | "u8R" | "uR" | "UR" | "LR") {
                    i = skip_raw_string(bytes, i, &mut line, &mut line_start);
                    push(&mut out, TokKind::Str, &src[start..i], start_line, col);
                } else if bytes.get(i) == Some(&b'"') && matches!(word, "L" | "u" | "U" | "u8") {
                    i = skip_string(bytes, i, b'"', &mut line, &mut line_start);
                    push(&mut out, TokKind::Str, &src[start..i], start_line, col);
                } else if bytes.get(i) == Some(&b'\'') && matches!(word, "L" | "u" | "U" | "u8") {
                    i = skip_string(bytes, i, b'\'', &mut line, &mut line_start);
                    push(&mut out, TokKind::Char, &src[start..i], start_line, col);
                } else {
                    push(&mut out, TokKind::Ident, word, line, col);
                }
                code_on_line = true;
            }
            _ => {
                let col = (i - line_start + 1) as u32;
                let rest = &src[i..];
                let len = PUNCTS
                    .iter()
                    .find(|p| rest.starts_with(**p))
                    .map(|p| p.len())
                    .unwrap_or_else(|| rest.chars().next().map_or(1, char::len_utf8));
                push(&mut out, TokKind::Punct, &src[i..i + len], line, col);
                i += len;
                code_on_line = true;
            }
        }
    }
    out.last_line = line;
    out
}

fn push<'a>(out: &mut Lexed<'a>, kind: TokKind, text: &'a str, line: u32, col: u32) {
    out.tokens.push(Token {
        kind,
        text,
        line,
        col,
    });
}

fn skip_string(bytes: &[u8], mut i: usize, quote: u8, line: &mut u32, line_start: &mut usize) -> usize {
    i += 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                if bytes.get(i + 1) == Some(&b'\n') {
                    *line += 1;
                    *line_start = i + 2;
                }
                i += 2;
            }
            b'\n' => return i, // unterminated; stop at end of line
            c if c == quote => return i + 1,
            _ => i += 1,
        }
    }
    bytes.len()
}

fn skip_raw_string(bytes: &[u8], i: usize, line: &mut u32, line_start: &mut usize) -> usize {
    // i points at the opening quote: R"delim( ... )delim"
    let mut j = i + 1;
    while j < bytes.len() && bytes[j] != b'(' && bytes[j] != b'\n' {
        j += 1;
    }
    if j >= bytes.len() || bytes[j] != b'(' {
        return skip_string(bytes, i, b'"', line, line_start);
    }
    let delim = &bytes[i + 1..j];
    let mut k = j + 1;
    while k < bytes.len() {
        if bytes[k] == b')'
            && bytes[k + 1..].starts_with(delim)
            && bytes.get(k + 1 + delim.len()) == Some(&b'"')
        {
            return k + delim.len() + 2;
        }
        if bytes[k] == b'\n' {
            *line += 1;
            *line_start = k + 1;
        }
        k += 1;
    }
    bytes.len()
}

fn skip_number(bytes: &[u8], mut i: usize) -> usize {
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_alphanumeric() || c == b'.' || c == b'_' {
            i += 1;
        } else if c == b'\'' && bytes.get(i + 1).is_some_and(u8::is_ascii_alphanumeric) {
            i += 1;
        } else if (c == b'+' || c == b'-') && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P') {
            i += 1;
        } else {
            break;
        }
    }
    i
}
