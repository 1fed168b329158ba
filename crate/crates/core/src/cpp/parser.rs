use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::lexer::{lex, Comment, TokKind, Token};
use super::signature::{normalize_params, render_tokens};
use crate::index::SymbolKind;

/// A declaration found in one file. `parent` indexes into the same file's
/// symbol list and mirrors lexical nesting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalSymbol {
    pub kind: SymbolKind,
    pub name: String,
    pub qualified_name: String,
    pub signature: String,
    pub start_line: u32,
    pub end_line: u32,
    pub is_definition: bool,
    pub template_params: String,
    pub is_virtual: bool,
    pub is_override: bool,
    pub bases: Vec<String>,
    pub leading_comment: String,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    /// `f(...)` or `ns::f(...)`.
    Plain,
    /// `obj.f(...)` or `ptr->f(...)`.
    Member,
    /// `T var(...)`, `T var{...}` or `new T(...)`.
    Construct,
}

/// A call expression awaiting name resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCall {
    /// Local index of the calling function.
    pub caller: usize,
    /// Callee text as written, template arguments removed. A leading `::`
    /// restricts lookup to the global scope.
    pub callee: String,
    pub kind: CallKind,
    pub line: u32,
    pub column: u32,
    /// Class the caller is a member of, if any.
    pub class_scope: Option<String>,
    /// Innermost namespace lexically enclosing the caller (`""` = global).
    pub namespace_scope: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedUnit {
    pub symbols: Vec<LocalSymbol>,
    pub calls: Vec<RawCall>,
    pub includes: Vec<String>,
    /// Recovered syntax problems (unbalanced brackets, unexpected tokens).
    pub error_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScopeKind {
    Namespace,
    Class,
}

#[derive(Debug, Clone)]
struct Scope {
    kind: ScopeKind,
    qn: String,
    symbol: Option<usize>,
    class_name: String,
}

fn qualify(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}::{name}")
    }
}

/// Parses one file. Never fails: malformed regions are skipped and counted
/// in [`ParsedUnit::error_count`].
pub fn parse_source(path: &str, src: &str) -> ParsedUnit {
    let lexed = lex(src);
    let mut comment_ends: HashMap<u32, usize> = HashMap::new();
    for (i, c) in lexed.comments.iter().enumerate() {
        if !c.trailing {
            comment_ends.insert(c.end_line, i);
        }
    }
    let (match_of, unmatched) = match_brackets(&lexed.tokens);
    let mut parser = Parser {
        toks: lexed.tokens,
        match_of,
        pos: 0,
        path,
        comments: lexed.comments,
        comment_ends,
        last_line: lexed.last_line,
        scopes: vec![Scope {
            kind: ScopeKind::Namespace,
            qn: String::new(),
            symbol: None,
            class_name: String::new(),
        }],
        out: ParsedUnit {
            includes: lexed.includes,
            error_count: unmatched,
            ..ParsedUnit::default()
        },
    };
    parser.parse_decls(false);
    parser.out
}

/// Matching partner for every `(`, `[` and `{`, and the number of brackets
/// left unmatched.
fn match_brackets(toks: &[Token<'_>]) -> (Vec<Option<usize>>, usize) {
    let mut match_of = vec![None; toks.len()];
    let mut stack: Vec<usize> = Vec::new();
    let mut unmatched = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.kind != TokKind::Punct {
            continue;
        }
        let opener = match t.text {
            "(" | "[" | "{" => {
                stack.push(i);
                continue;
            }
            ")" => "(",
            "]" => "[",
            "}" => "{",
            _ => continue,
        };
        match stack.iter().rposition(|&o| toks[o].text == opener) {
            Some(at) => {
                unmatched += stack.len() - at - 1;
                let open = stack[at];
                stack.truncate(at);
                match_of[open] = Some(i);
                match_of[i] = Some(open);
            }
            None => unmatched += 1,
        }
    }
    unmatched += stack.len();
    (match_of, unmatched)
}

struct Parser<'a> {
    toks: Vec<Token<'a>>,
    match_of: Vec<Option<usize>>,
    pos: usize,
    path: &'a str,
    comments: Vec<Comment>,
    comment_ends: HashMap<u32, usize>,
    last_line: u32,
    scopes: Vec<Scope>,
    out: ParsedUnit,
}

struct FunctionDeclarator {
    name: String,
    qualifiers: Vec<String>,
    name_start: usize,
    open: usize,
    close: usize,
}

impl<'a> Parser<'a> {
    fn text(&self, i: usize) -> &'a str {
        self.toks.get(i).map_or("", |t| t.text)
    }

    fn is_name_at(&self, i: usize) -> bool {
        self.toks.get(i).is_some_and(Token::is_name)
    }

    fn line(&self, i: usize) -> u32 {
        self.toks.get(i).map_or(self.last_line, |t| t.line)
    }

    fn prefix(&self) -> String {
        self.scopes.last().map(|s| s.qn.clone()).unwrap_or_default()
    }

    fn namespace_scope(&self) -> String {
        self.scopes
            .iter()
            .rev()
            .find(|s| s.kind == ScopeKind::Namespace)
            .map(|s| s.qn.clone())
            .unwrap_or_default()
    }

    fn enclosing_class(&self) -> Option<&Scope> {
        self.scopes.last().filter(|s| s.kind == ScopeKind::Class)
    }

    fn parent(&self) -> Option<usize> {
        self.scopes.last().and_then(|s| s.symbol)
    }

    /// Index just past the bracket group opened at `i`.
    fn past_group(&mut self, i: usize) -> usize {
        match self.match_of.get(i).copied().flatten() {
            Some(close) if close > i => close + 1,
            _ => {
                self.out.error_count += 1;
                i + 1
            }
        }
    }

    /// Index of the `>` closing the angle group opened at `i`, if the group
    /// closes before any `;`, `{` or `}`.
    fn angle_close(&self, i: usize) -> Option<usize> {
        let mut depth = 0i32;
        let mut j = i;
        while let Some(t) = self.toks.get(j) {
            match t.text {
                "<" => depth += 1,
                ">" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(j);
                    }
                }
                "(" | "[" => {
                    j = self.match_of[j]?;
                }
                ";" | "{" | "}" => return None,
                _ => {}
            }
            j += 1;
        }
        None
    }

    fn leading_comment(&self, line: u32) -> String {
        let mut parts: Vec<&str> = Vec::new();
        let mut want = line.saturating_sub(1);
        while want > 0 {
            let Some(&idx) = self.comment_ends.get(&want) else {
                break;
            };
            let c = &self.comments[idx];
            parts.push(&c.text);
            want = c.start_line.saturating_sub(1);
        }
        parts.reverse();
        parts.join(" ")
    }

    #[allow(clippy::too_many_arguments)]
    fn push_symbol(
        &mut self,
        kind: SymbolKind,
        name: String,
        qualified_name: String,
        start_tok: usize,
        end_line: u32,
        is_definition: bool,
    ) -> usize {
        let start_line = self.line(start_tok);
        let sym = LocalSymbol {
            kind,
            name,
            qualified_name,
            signature: String::new(),
            start_line,
            end_line: end_line.max(start_line),
            is_definition,
            template_params: String::new(),
            is_virtual: false,
            is_override: false,
            bases: Vec::new(),
            leading_comment: self.leading_comment(start_line),
            parent: self.parent(),
        };
        self.out.symbols.push(sym);
        self.out.symbols.len() - 1
    }

    fn skip_to_semicolon(&mut self) {
        while let Some(t) = self.toks.get(self.pos) {
            match t.text {
                "(" | "[" | "{" => self.pos = self.past_group(self.pos),
                ";" => {
                    self.pos += 1;
                    return;
                }
                "}" => return,
                _ => self.pos += 1,
            }
        }
    }

    fn skip_attributes(&mut self, mut j: usize) -> usize {
        loop {
            match self.text(j) {
                "[" if self.text(j + 1) == "[" => j = self.past_group(j),
                "alignas" | "__attribute__" | "__declspec" if self.text(j + 1) == "(" => {
                    j = self.past_group(j + 1)
                }
                _ => return j,
            }
        }
    }

    /// Parses declarations until the matching `}` (when `closing`) or end of
    /// input. Returns the line where the scope ended.
    fn parse_decls(&mut self, closing: bool) -> u32 {
        loop {
            let Some(tok) = self.toks.get(self.pos).copied() else {
                if closing {
                    self.out.error_count += 1;
                }
                return self.last_line;
            };
            let before = self.pos;
            match tok.text {
                "}" => {
                    self.pos += 1;
                    if closing {
                        return tok.line;
                    }
                    self.out.error_count += 1;
                }
                ";" => self.pos += 1,
                "namespace" => self.parse_namespace(),
                "inline" if self.text(self.pos + 1) == "namespace" => self.pos += 1,
                "template" => self.parse_template(),
                "extern" if self.toks.get(self.pos + 1).is_some_and(|t| t.kind == TokKind::Str) => {
                    if self.text(self.pos + 2) == "{" {
                        self.pos += 3;
                        self.parse_decls(true);
                    } else {
                        self.pos += 2;
                    }
                }
                "using" | "typedef" | "static_assert" | "concept" => self.skip_to_semicolon(),
                "class" | "struct" | "union" => {
                    let start = self.pos;
                    if !self.parse_class_like(start, None) {
                        self.pos = start;
                        self.parse_simple_decl(start, start, None);
                    }
                }
                "enum" => {
                    let start = self.pos;
                    if !self.parse_enum(start) {
                        self.pos = start;
                        self.parse_simple_decl(start, start, None);
                    }
                }
                "[" if self.text(self.pos + 1) == "[" => self.pos = self.past_group(self.pos),
                _ if tok.kind == TokKind::Ident && self.text(self.pos + 1) == ":" => {
                    // access specifier or label-like macro (`public:`, `signals:`)
                    self.pos += 2;
                }
                _ => {
                    let start = self.pos;
                    self.parse_simple_decl(start, start, None);
                }
            }
            if self.pos == before {
                self.out.error_count += 1;
                self.pos += 1;
            }
        }
    }

    fn parse_namespace(&mut self) {
        let start = self.pos;
        let mut j = self.skip_attributes(self.pos + 1);
        let mut names: Vec<String> = Vec::new();
        while self.is_name_at(j) {
            names.push(self.text(j).to_string());
            j += 1;
            if self.text(j) == "::" {
                j += 1;
                if self.text(j) == "inline" {
                    j += 1;
                }
            } else {
                break;
            }
        }
        j = self.skip_attributes(j);
        match self.text(j) {
            "{" => {}
            "=" => {
                self.pos = j;
                self.skip_to_semicolon();
                return;
            }
            _ => {
                self.out.error_count += 1;
                self.pos = j;
                self.skip_to_semicolon();
                return;
            }
        }
        if names.is_empty() {
            names.push(format!("(anon@{})", self.path));
        }
        let mut opened = Vec::new();
        for name in names {
            let qn = qualify(&self.prefix(), &name);
            let idx = self.push_symbol(SymbolKind::Namespace, name, qn.clone(), start, 0, true);
            self.scopes.push(Scope {
                kind: ScopeKind::Namespace,
                qn,
                symbol: Some(idx),
                class_name: String::new(),
            });
            opened.push(idx);
        }
        self.pos = j + 1;
        let end = self.parse_decls(true);
        for idx in opened {
            self.out.symbols[idx].end_line = end;
            self.scopes.pop();
        }
    }

    fn parse_template(&mut self) {
        let start = self.pos;
        let mut params = None;
        while self.text(self.pos) == "template" {
            if self.text(self.pos + 1) != "<" {
                // explicit instantiation
                self.skip_to_semicolon();
                return;
            }
            let Some(close) = self.angle_close(self.pos + 1) else {
                self.out.error_count += 1;
                self.pos += 1;
                self.skip_to_semicolon();
                return;
            };
            params = Some(render_tokens(&self.toks[self.pos + 2..close]));
            self.pos = close + 1;
        }
        match self.text(self.pos) {
            "class" | "struct" | "union" => {
                let kw = self.pos;
                if !self.parse_class_like(start, params.clone()) {
                    self.pos = kw;
                    self.parse_simple_decl(start, kw, params);
                }
            }
            "using" | "concept" => self.skip_to_semicolon(),
            _ => {
                let here = self.pos;
                self.parse_simple_decl(start, here, params);
            }
        }
    }

    /// Parses `class|struct|union` heads and bodies. Returns false when the
    /// keyword is an elaborated type specifier of some other declaration.
    fn parse_class_like(&mut self, decl_start: usize, tparams: Option<String>) -> bool {
        let kw = self.text(self.pos);
        let mut j = self.skip_attributes(self.pos + 1);
        if self.text(j) == "{" {
            // anonymous class: not indexed
            self.pos = self.past_group(j);
            self.skip_to_semicolon();
            return true;
        }
        if !self.is_name_at(j) {
            return false;
        }
        let mut quals: Vec<String> = Vec::new();
        let mut name = self.text(j).to_string();
        j += 1;
        loop {
            if self.text(j) == "<" {
                match self.angle_close(j) {
                    Some(close) => j = close + 1,
                    None => return false,
                }
            }
            if self.text(j) == "::" && self.is_name_at(j + 1) {
                quals.push(std::mem::replace(&mut name, self.text(j + 1).to_string()));
                j += 2;
                continue;
            }
            break;
        }
        if self.text(j) == "final" {
            j += 1;
        }
        let mut qn = self.prefix();
        for q in &quals {
            qn = qualify(&qn, q);
        }
        let qn = qualify(&qn, &name);
        match self.text(j) {
            ";" => {
                let idx = self.push_symbol(
                    SymbolKind::ForwardDeclaration,
                    name,
                    qn,
                    decl_start,
                    self.line(j),
                    false,
                );
                self.out.symbols[idx].template_params = tparams.unwrap_or_default();
                self.pos = j + 1;
                true
            }
            "{" | ":" => {
                let mut bases = Vec::new();
                if self.text(j) == ":" {
                    let base_start = j + 1;
                    let mut k = base_start;
                    while k < self.toks.len() && !matches!(self.text(k), "{" | ";" | "}") {
                        match self.text(k) {
                            "<" => k = self.angle_close(k).map_or(k + 1, |c| c + 1),
                            "(" => k = self.past_group(k),
                            _ => k += 1,
                        }
                    }
                    if self.text(k) != "{" {
                        self.out.error_count += 1;
                        self.pos = k;
                        self.skip_to_semicolon();
                        return true;
                    }
                    bases = self.parse_bases(base_start, k);
                    j = k;
                }
                let kind = if tparams.is_some() {
                    SymbolKind::TemplateClass
                } else if kw == "class" {
                    SymbolKind::Class
                } else {
                    SymbolKind::Struct
                };
                let idx = self.push_symbol(kind, name.clone(), qn.clone(), decl_start, 0, true);
                self.out.symbols[idx].template_params = tparams.unwrap_or_default();
                self.out.symbols[idx].bases = bases;
                self.scopes.push(Scope {
                    kind: ScopeKind::Class,
                    qn,
                    symbol: Some(idx),
                    class_name: name,
                });
                self.pos = j + 1;
                let end = self.parse_decls(true);
                self.scopes.pop();
                self.out.symbols[idx].end_line = end.max(self.out.symbols[idx].start_line);
                if self.text(self.pos) == ";" {
                    self.pos += 1;
                } else {
                    // trailing declarators: `} instance;`
                    self.skip_to_semicolon();
                }
                true
            }
            _ => false,
        }
    }

    fn parse_bases(&mut self, start: usize, end: usize) -> Vec<String> {
        let mut bases = Vec::new();
        let mut current = String::new();
        let mut k = start;
        let mut done_with_current = false;
        while k < end {
            let t = self.text(k);
            match t {
                "," => {
                    if !current.is_empty() {
                        bases.push(std::mem::take(&mut current));
                    }
                    done_with_current = false;
                    k += 1;
                }
                "public" | "private" | "protected" | "virtual" | "..." => k += 1,
                "<" => k = self.angle_close(k).map_or(k + 1, |c| c + 1),
                "(" => k = self.past_group(k),
                "::" => {
                    if !current.is_empty() && !done_with_current {
                        current.push_str("::");
                    }
                    k += 1;
                }
                _ if self.is_name_at(k) && !done_with_current => {
                    if !current.is_empty() && !current.ends_with("::") {
                        // two names in a row: keep the last (e.g. a macro before the base)
                        current.clear();
                    }
                    current.push_str(t);
                    k += 1;
                }
                _ => {
                    done_with_current = !current.is_empty();
                    k += 1;
                }
            }
        }
        if !current.is_empty() {
            bases.push(current);
        }
        bases
    }

    fn parse_enum(&mut self, decl_start: usize) -> bool {
        let mut j = self.pos + 1;
        if matches!(self.text(j), "class" | "struct") {
            j += 1;
        }
        j = self.skip_attributes(j);
        let name = if self.is_name_at(j) {
            j += 1;
            Some(self.text(j - 1).to_string())
        } else {
            None
        };
        if self.text(j) == ":" {
            while j < self.toks.len() && !matches!(self.text(j), "{" | ";" | "}") {
                j += 1;
            }
        }
        match (self.text(j), name) {
            ("{", Some(name)) => {
                let after = self.past_group(j);
                let end = self.line(after.saturating_sub(1));
                let qn = qualify(&self.prefix(), &name);
                self.push_symbol(SymbolKind::Enum, name, qn, decl_start, end, true);
                self.pos = after;
                self.skip_to_semicolon();
                true
            }
            ("{", None) => {
                self.pos = self.past_group(j);
                self.skip_to_semicolon();
                true
            }
            (";", Some(name)) => {
                let qn = qualify(&self.prefix(), &name);
                self.push_symbol(
                    SymbolKind::ForwardDeclaration,
                    name,
                    qn,
                    decl_start,
                    self.line(j),
                    false,
                );
                self.pos = j + 1;
                true
            }
            _ => false,
        }
    }

    /// Finds the declarator-id ending just before the `(` at `open`.
    fn declarator_before(&self, open: usize, start: usize) -> Option<(String, Vec<String>, usize)> {
        if open == 0 || open <= start {
            return None;
        }
        let mut k = open - 1;
        if !self.is_name_at(k) {
            return None;
        }
        let mut name = self.text(k).to_string();
        if k > start && self.text(k - 1) == "~" {
            name = format!("~{name}");
            k -= 1;
        }
        let quals = self.qualifiers_before(&mut k, start);
        Some((name, quals, k))
    }

    /// Walks `A::B<T>::` backwards from the name at `*k`.
    fn qualifiers_before(&self, k: &mut usize, start: usize) -> Vec<String> {
        let mut quals: Vec<String> = Vec::new();
        while *k >= start + 2 && self.text(*k - 1) == "::" {
            let mut q = *k - 2;
            if self.text(q) == ">" {
                let mut depth = 0i32;
                let mut m = q;
                loop {
                    match self.text(m) {
                        ">" => depth += 1,
                        "<" => depth -= 1,
                        _ => {}
                    }
                    if depth == 0 || m <= start {
                        break;
                    }
                    m -= 1;
                }
                if depth != 0 || m <= start {
                    break;
                }
                q = m - 1;
            }
            if !self.is_name_at(q) {
                break;
            }
            quals.insert(0, self.text(q).to_string());
            *k = q;
        }
        if *k > start && self.text(*k - 1) == "::" {
            *k -= 1;
        }
        quals
    }

    fn find_function_declarator(
        &mut self,
        mut start: usize,
    ) -> (Option<FunctionDeclarator>, usize, usize) {
        let mut i = start;
        while let Some(t) = self.toks.get(i).copied() {
            match t.text {
                ";" | "{" | "=" | "}" | ":" | "," => break,
                "operator" => {
                    let mut j = i + 1;
                    if self.text(j) == "(" && self.text(j + 1) == ")" {
                        j += 2;
                    }
                    while j < self.toks.len() && !matches!(self.text(j), "(" | ";" | "{") {
                        j += 1;
                    }
                    if self.text(j) != "(" {
                        return (None, start, j);
                    }
                    let name = format!(
                        "operator{}",
                        render_tokens(&self.toks[i + 1..j]).replace(' ', "")
                    );
                    let name = if name.starts_with("operator") && self.toks[i + 1].is_wordlike() {
                        format!("operator {}", render_tokens(&self.toks[i + 1..j]))
                    } else {
                        name
                    };
                    let mut k = i;
                    let quals = self.qualifiers_before(&mut k, start);
                    let close = match self.match_of[j] {
                        Some(c) => c,
                        None => return (None, start, j),
                    };
                    return (
                        Some(FunctionDeclarator {
                            name,
                            qualifiers: quals,
                            name_start: k,
                            open: j,
                            close,
                        }),
                        start,
                        close + 1,
                    );
                }
                "(" => {
                    if let Some((name, qualifiers, name_start)) = self.declarator_before(i, start) {
                        let Some(close) = self.match_of[i] else {
                            self.out.error_count += 1;
                            return (None, start, i + 1);
                        };
                        // `MACRO(args) real declaration`: skip the macro prefix.
                        let next = self.toks.get(close + 1);
                        let macro_prefix = name_start == start
                            && next.is_some_and(|n| {
                                (n.is_name()
                                    && !matches!(n.text, "override" | "final")
                                    && !self.text(close + 2).is_empty()
                                    && !matches!(self.text(close + 2), ";" | "{"))
                                    || (n.kind == TokKind::Ident
                                        && super::is_type_keyword(n.text))
                            });
                        if macro_prefix {
                            start = close + 1;
                            i = close + 1;
                            continue;
                        }
                        return (
                            Some(FunctionDeclarator {
                                name,
                                qualifiers,
                                name_start,
                                open: i,
                                close,
                            }),
                            start,
                            close + 1,
                        );
                    }
                    i = self.past_group(i);
                    continue;
                }
                "[" => {
                    i = self.past_group(i);
                    continue;
                }
                "<" => {
                    i = self.angle_close(i).map_or(i + 1, |c| c + 1);
                    continue;
                }
                _ => {}
            }
            i += 1;
        }
        (None, start, i)
    }

    /// Variables, functions (declarations and definitions), out-of-class
    /// member definitions and anything else ending in `;` or a body.
    fn parse_simple_decl(&mut self, decl_start: usize, start: usize, tparams: Option<String>) {
        let (func, start, stop) = self.find_function_declarator(start);
        let specs: Vec<&str> = match &func {
            Some(f) => self.toks[start..f.name_start].iter().map(|t| t.text).collect(),
            None => self.toks[start..stop.min(self.toks.len())]
                .iter()
                .map(|t| t.text)
                .collect(),
        };
        let is_friend = specs.contains(&"friend");
        let is_typedef = specs.iter().any(|s| matches!(*s, "typedef" | "using"));
        let is_extern = specs.contains(&"extern");
        let is_virtual = specs.contains(&"virtual");

        let Some(func) = func else {
            self.finish_variable(decl_start, start, stop, is_friend || is_typedef, is_extern);
            return;
        };
        if is_typedef {
            self.pos = stop;
            self.skip_to_semicolon();
            return;
        }

        let class = self.enclosing_class().map(|s| s.class_name.clone());
        let spec_empty = func.name_start == start;
        let is_ctor_name = |quals: &[String], name: &str| -> bool {
            match quals.last() {
                Some(q) => name == q,
                None => class.as_deref() == Some(name),
            }
        };
        let is_dtor_name = |quals: &[String], name: &str| -> bool {
            let owner = quals.last().cloned().or_else(|| class.clone());
            owner.is_some_and(|o| name.strip_prefix('~') == Some(o.as_str()))
        };
        let ctor = is_ctor_name(&func.qualifiers, &func.name);
        let dtor = is_dtor_name(&func.qualifiers, &func.name);
        let conversion = func.name.starts_with("operator");
        if spec_empty && !ctor && !dtor && !conversion {
            // macro invocation at declaration level
            self.pos = func.close + 1;
            if self.text(self.pos) == ";" {
                self.pos += 1;
            }
            return;
        }
        let params = &self.toks[func.open + 1..func.close];
        let literal_arg = !spec_empty
            && !params.is_empty()
            && params
                .split(|t| t.is(","))
                .any(|p| {
                    p.first().is_some_and(|t| {
                        matches!(t.kind, TokKind::Number | TokKind::Str | TokKind::Char)
                            || matches!(t.text, "true" | "false" | "nullptr")
                    })
                });
        if literal_arg {
            // `Type name("arg");` at declaration level: a variable.
            let name_tok = func.open - 1;
            self.pos = func.close + 1;
            let end = self.semicolon_line();
            if !is_friend && self.is_name_at(name_tok) {
                let qn = qualify(&self.prefix(), &func.name);
                self.push_symbol(SymbolKind::Variable, func.name.clone(), qn, decl_start, end, !is_extern);
            }
            self.skip_to_semicolon();
            return;
        }
        let signature_core = normalize_params(params);

        // Trailer: cv/ref qualifiers, exception specs, virt-specifiers,
        // trailing return type, `= 0/default/delete`, then `;` or a body.
        let mut j = func.close + 1;
        let mut is_const = false;
        let mut is_override = false;
        let mut is_definition = false;
        let mut body: Option<(usize, usize)> = None;
        let mut init_list: Vec<(usize, usize)> = Vec::new();
        let mut end_line = self.line(func.close);
        loop {
            let t = self.text(j);
            match t {
                "const" => {
                    is_const = true;
                    j += 1;
                }
                "volatile" | "&" | "&&" | "mutable" | "constexpr" | "final" => j += 1,
                "override" => {
                    is_override = true;
                    j += 1;
                }
                "noexcept" | "throw" | "__attribute__" | "alignas" => {
                    j += 1;
                    if self.text(j) == "(" {
                        j = self.past_group(j);
                    }
                }
                "[" if self.text(j + 1) == "[" => j = self.past_group(j),
                "->" => {
                    j += 1;
                    while j < self.toks.len()
                        && !matches!(self.text(j), ";" | "{" | "=" | "}" | "override" | "final")
                    {
                        match self.text(j) {
                            "(" | "[" => j = self.past_group(j),
                            _ => j += 1,
                        }
                    }
                }
                "requires" => {
                    j += 1;
                    while j < self.toks.len() && !matches!(self.text(j), ";" | "{" | "}") {
                        match self.text(j) {
                            "(" | "[" => j = self.past_group(j),
                            _ => j += 1,
                        }
                    }
                }
                "=" => {
                    if matches!(self.text(j + 1), "default" | "delete") {
                        is_definition = true;
                    }
                    j += 2;
                }
                "try" => j += 1,
                ":" => {
                    j += 1;
                    while j < self.toks.len() && !matches!(self.text(j), ";" | "}") {
                        if self.text(j) == "(" || self.text(j) == "{" {
                            let open = j;
                            let close_idx = match self.match_of[open] {
                                Some(c) => c,
                                None => {
                                    self.out.error_count += 1;
                                    break;
                                }
                            };
                            // `member{...}` vs. the body: a brace right after
                            // a name is an initializer.
                            if self.text(j) == "{"
                                && !(j > 0 && (self.is_name_at(j - 1) || self.text(j - 1) == ">"))
                            {
                                break;
                            }
                            init_list.push((open, close_idx));
                            j = close_idx + 1;
                        } else if self.text(j) == "<" {
                            j = self.angle_close(j).map_or(j + 1, |c| c + 1);
                        } else {
                            j += 1;
                        }
                    }
                }
                ";" => {
                    end_line = self.line(j);
                    j += 1;
                    break;
                }
                "{" => {
                    let Some(close) = self.match_of[j] else {
                        self.out.error_count += 1;
                        j = self.toks.len();
                        end_line = self.last_line;
                        break;
                    };
                    body = Some((j, close));
                    is_definition = true;
                    end_line = self.line(close);
                    j = close + 1;
                    // function-try-block handlers
                    while self.text(j) == "catch" && self.text(j + 1) == "(" {
                        let after = self.past_group(j + 1);
                        if self.text(after) == "{" {
                            let Some(c) = self.match_of[after] else { break };
                            end_line = self.line(c);
                            j = c + 1;
                        } else {
                            j = after;
                            break;
                        }
                    }
                    break;
                }
                _ if self.is_name_at(j) => {
                    // trailing macro such as `Q_DECL_OVERRIDE` or `NOEXCEPT(x)`
                    j += 1;
                    if self.text(j) == "(" {
                        j = self.past_group(j);
                    }
                }
                "," => {
                    // further declarators: `int f(int), g(int);`
                    self.pos = j;
                    self.skip_to_semicolon();
                    j = self.pos;
                    end_line = self.line(j.saturating_sub(1));
                    break;
                }
                _ => {
                    self.out.error_count += 1;
                    break;
                }
            }
        }
        self.pos = j.max(func.close + 1);

        if is_friend {
            return;
        }

        let prefix = self.prefix();
        let mut owner = prefix.clone();
        for q in &func.qualifiers {
            owner = qualify(&owner, q);
        }
        let qualified_name = qualify(&owner, &func.name);
        let in_class = self.enclosing_class().is_some();
        let kind = if ctor {
            SymbolKind::Constructor
        } else if tparams.is_some() {
            SymbolKind::TemplateFunction
        } else if in_class || !func.qualifiers.is_empty() {
            SymbolKind::MemberFunction
        } else {
            SymbolKind::FreeFunction
        };
        let class_scope = if !func.qualifiers.is_empty() {
            Some(owner.clone())
        } else if in_class {
            Some(prefix.clone())
        } else {
            None
        };
        let signature = if is_const {
            format!("{signature_core} const")
        } else {
            signature_core
        };
        let idx = self.push_symbol(kind, func.name.clone(), qualified_name, decl_start, end_line, is_definition);
        {
            let sym = &mut self.out.symbols[idx];
            sym.signature = signature;
            sym.template_params = tparams.unwrap_or_default();
            sym.is_virtual = is_virtual;
            sym.is_override = is_override;
        }
        let namespace_scope = self.namespace_scope();
        for (open, close) in init_list {
            self.scan_calls(open, close, idx, &class_scope, &namespace_scope);
        }
        if let Some((open, close)) = body {
            self.scan_calls(open, close, idx, &class_scope, &namespace_scope);
        }
    }

    fn semicolon_line(&self) -> u32 {
        let mut k = self.pos;
        while k < self.toks.len() && !matches!(self.text(k), ";" | "}") {
            k += 1;
        }
        self.line(k.min(self.toks.len().saturating_sub(1)))
    }

    fn finish_variable(&mut self, decl_start: usize, start: usize, stop: usize, suppressed: bool, is_extern: bool) {
        // Name: last plain identifier before the terminator, skipping groups.
        let mut name_idx = None;
        let mut k = start;
        while k < stop.min(self.toks.len()) {
            match self.text(k) {
                "[" | "(" => k = self.past_group(k),
                "<" => k = self.angle_close(k).map_or(k + 1, |c| c + 1),
                _ => {
                    if self.is_name_at(k) {
                        name_idx = Some(k);
                    }
                    k += 1;
                }
            }
        }
        self.pos = stop;
        let end = self.semicolon_line();
        if let Some(n) = name_idx {
            if n > start && !suppressed {
                let name = self.text(n).to_string();
                let qn = qualify(&self.prefix(), &name);
                self.push_symbol(SymbolKind::Variable, name, qn, decl_start, end, !is_extern);
            }
        }
        match self.text(self.pos) {
            ";" => self.pos += 1,
            "}" => {
                if self.pos == start {
                    return;
                }
                self.out.error_count += 1;
            }
            "{" => {
                self.pos = self.past_group(self.pos);
                self.skip_to_semicolon();
            }
            _ => self.skip_to_semicolon(),
        }
    }

    /// Index of the `>` closing template arguments at `i`, accepting only
    /// tokens that can appear in a type-id.
    fn template_args_close(&self, i: usize, limit: usize) -> Option<usize> {
        let mut depth = 0i32;
        let mut j = i;
        while j < limit {
            let t = &self.toks[j];
            match t.text {
                "<" => depth += 1,
                ">" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(j);
                    }
                }
                "::" | "," | "*" | "&" | "&&" | "..." => {}
                _ if matches!(t.kind, TokKind::Ident | TokKind::Number) => {}
                _ => return None,
            }
            j += 1;
        }
        None
    }

    /// `A::B<T>::c` forward from `k`; returns (text, index after, index of
    /// the last name).
    fn qualified_forward(&self, k: usize, limit: usize) -> (String, usize, usize) {
        let mut text = self.text(k).to_string();
        let mut last = k;
        let mut j = k + 1;
        loop {
            if self.text(j) == "<" {
                match self.template_args_close(j, limit) {
                    Some(gt) if matches!(self.text(gt + 1), "(" | "::") => j = gt + 1,
                    _ => break,
                }
            }
            if j + 1 < limit && self.text(j) == "::" && self.is_name_at(j + 1) {
                text.push_str("::");
                text.push_str(self.text(j + 1));
                last = j + 1;
                j += 2;
                continue;
            }
            break;
        }
        (text, j, last)
    }

    fn scan_calls(
        &mut self,
        open: usize,
        close: usize,
        caller: usize,
        class_scope: &Option<String>,
        namespace_scope: &str,
    ) {
        let mut k = open + 1;
        while k < close {
            let t = self.toks[k];
            let prev = if k > open + 1 { self.text(k - 1) } else { "" };
            if t.is("new") {
                let mut j = k + 1;
                if self.text(j) == "(" {
                    j = self.match_of[j].map_or(j + 1, |c| c + 1);
                }
                while matches!(self.text(j), "const" | "volatile" | "typename") {
                    j += 1;
                }
                let global = self.text(j) == "::";
                if global {
                    j += 1;
                }
                if j < close && self.is_name_at(j) {
                    let (text, after, last) = self.qualified_forward(j, close);
                    let callee = if global { format!("::{text}") } else { text };
                    self.push_call(caller, callee, CallKind::Construct, last, class_scope, namespace_scope);
                    k = after;
                } else {
                    k = j.max(k + 1);
                }
                continue;
            }
            let global = t.is("::") && k + 1 < close && self.is_name_at(k + 1) && !self.is_name_at(k.wrapping_sub(1)) && prev != ">";
            if (t.is_name() && prev != "::" && prev != "~") || global {
                let first = if global { k + 1 } else { k };
                let (text, after, last) = self.qualified_forward(first, close);
                let callee = if global { format!("::{text}") } else { text };
                let next = self.text(after);
                if next == "(" && after < close {
                    let kind = if matches!(prev, "." | "->") {
                        CallKind::Member
                    } else {
                        CallKind::Plain
                    };
                    self.push_call(caller, callee, kind, last, class_scope, namespace_scope);
                    k = after;
                    continue;
                }
                if after + 1 < close
                    && self.is_name_at(after)
                    && matches!(self.text(after + 1), "(" | "{")
                    && !matches!(prev, "." | "->")
                {
                    self.push_call(caller, callee, CallKind::Construct, last, class_scope, namespace_scope);
                    k = after + 1;
                    continue;
                }
                k = after;
                continue;
            }
            k += 1;
        }
    }

    fn push_call(
        &mut self,
        caller: usize,
        callee: String,
        kind: CallKind,
        tok: usize,
        class_scope: &Option<String>,
        namespace_scope: &str,
    ) {
        let t = self.toks[tok];
        self.out.calls.push(RawCall {
            caller,
            callee,
            kind,
            line: t.line,
            column: t.col,
            class_scope: class_scope.clone(),
            namespace_scope: namespace_scope.to_string(),
        });
    }
}
