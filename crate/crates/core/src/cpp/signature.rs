//! Parameter-list normalization used for overload grouping and override
//! matching.

use super::lexer::{TokKind, Token};
use super::{is_keyword, is_type_keyword};

/// Joins tokens with single spaces only where C++ needs them: between two
/// words, after `,`, and between a closing `>`, `*` or `&` and a word.
pub fn render_tokens(tokens: &[Token<'_>]) -> String {
    let mut out = String::new();
    let mut prev: Option<&Token<'_>> = None;
    for tok in tokens {
        if let Some(p) = prev {
            let word_word = p.is_wordlike() && tok.is_wordlike();
            let after_comma = p.is(",");
            let closer_word = matches!(p.text, ">" | "*" | "&" | "&&") && tok.is_wordlike();
            if word_word || after_comma || closer_word {
                out.push(' ');
            }
        }
        out.push_str(tok.text);
        prev = Some(tok);
    }
    out
}

fn split_top_level<'t, 'a>(tokens: &'t [Token<'a>], sep: &str) -> Vec<&'t [Token<'a>]> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        match t.text {
            "(" | "[" | "{" | "<" => depth += 1,
            ")" | "]" | "}" | ">" => depth -= 1,
            s if s == sep && depth <= 0 => {
                parts.push(&tokens[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&tokens[start..]);
    parts
}

fn ends_type(tok: &Token<'_>) -> bool {
    match tok.kind {
        TokKind::Ident => !is_keyword(tok.text) || is_type_keyword(tok.text),
        TokKind::Punct => matches!(tok.text, ">" | "*" | "&" | "&&" | "..."),
        _ => false,
    }
}

fn normalize_param(tokens: &[Token<'_>]) -> String {
    // Cut default argument.
    let mut end = tokens.len();
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate() {
        match t.text {
            "(" | "[" | "{" | "<" => depth += 1,
            ")" | "]" | "}" | ">" => depth -= 1,
            "=" if depth <= 0 => {
                end = i;
                break;
            }
            _ => {}
        }
    }
    let mut toks: Vec<Token<'_>> = tokens[..end]
        .iter()
        .filter(|t| !matches!(t.text, "register"))
        .copied()
        .collect();
    // Peel trailing array suffixes so the name before them can be dropped.
    let mut suffix: Vec<Token<'_>> = Vec::new();
    while toks.last().is_some_and(|t| t.is("]")) {
        let Some(open) = toks.iter().rposition(|t| t.is("[")) else {
            break;
        };
        let mut group: Vec<Token<'_>> = toks.split_off(open);
        group.extend(suffix);
        suffix = group;
    }
    let n = toks.len();
    if n >= 2 {
        let last = &toks[n - 1];
        let prev = &toks[n - 2];
        let has_type = toks[..n - 1]
            .iter()
            .any(|t| !matches!(t.text, "const" | "volatile") && t.kind == TokKind::Ident);
        let prev_ok = ends_type(prev) || matches!(prev.text, "const" | "volatile");
        if last.is_name() && prev_ok && has_type {
            toks.pop();
        }
    }
    toks.extend(suffix);
    render_tokens(&toks)
}

/// `(type, type, ...)` for the tokens between a declarator's parentheses.
/// Parameter names and default arguments are removed; `(void)` becomes `()`.
pub fn normalize_params(tokens: &[Token<'_>]) -> String {
    if tokens.is_empty() || (tokens.len() == 1 && tokens[0].is("void")) {
        return "()".to_string();
    }
    let params: Vec<String> = split_top_level(tokens, ",")
        .into_iter()
        .map(normalize_param)
        .collect();
    format!("({})", params.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpp::lex;

    fn sig(params: &str) -> String {
        let l = lex(params);
        normalize_params(&l.tokens)
    }

    #[test]
    fn names_and_defaults_removed() {
        assert_eq!(sig("const std::string& query"), "(const std::string&)");
        assert_eq!(sig("int a, double b = 2.0"), "(int, double)");
        assert_eq!(sig("void"), "()");
        assert_eq!(sig(""), "()");
        assert_eq!(sig("int"), "(int)");
        assert_eq!(sig("Foo"), "(Foo)");
        assert_eq!(sig("const Foo"), "(const Foo)");
        assert_eq!(sig("unsigned   int  x"), "(unsigned int)");
    }

    #[test]
    fn templates_pointers_arrays() {
        assert_eq!(sig("std::map<int, std::vector<int>> const& m"), "(std::map<int, std::vector<int>> const&)");
        assert_eq!(sig("const char* const name"), "(const char* const)");
        assert_eq!(sig("int values[10]"), "(int[10])");
        assert_eq!(sig("Args&&... args"), "(Args&&...)");
    }

    #[test]
    fn whitespace_is_irrelevant() {
        assert_eq!(sig("const   std :: string  &q"), sig("const std::string& other"));
    }
}
