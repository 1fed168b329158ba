//! A recovering parser for the declaration-level subset of C++ the index
//! needs: namespaces, classes, enums, functions, templates, inheritance
//! lists and call expressions inside function bodies.
//!
//! There is no preprocessor. Directives are dropped (and `#include` targets
//! remembered); macro-heavy regions are parsed best-effort.

mod lexer;
mod parser;
mod signature;

pub use lexer::{lex, Comment, Lexed, TokKind, Token};
pub use parser::{parse_source, CallKind, LocalSymbol, ParsedUnit, RawCall};
pub use signature::{normalize_params, render_tokens};

/// Reserved words that can never name a declaration or a callee.
pub fn is_keyword(s: &str) -> bool {
    matches!(
        s,
        "alignas" | "alignof" | "and" | "and_eq" | "asm" | "auto" | "bitand" | "bitor" | "bool"
            | "break" | "case" | "catch" | "char" | "char8_t" | "char16_t" | "char32_t" | "class"
            | "compl" | "concept" | "const" | "consteval" | "constexpr" | "constinit"
            | "const_cast" | "continue" | "co_await" | "co_return" | "co_yield" | "decltype"
            | "default" | "delete" | "do" | "double" | "dynamic_cast" | "else" | "enum"
            | "explicit" | "export" | "extern" | "false" | "float" | "for" | "friend" | "goto"
            | "if" | "inline" | "int" | "long" | "mutable" | "namespace" | "new" | "noexcept"
            | "not" | "not_eq" | "nullptr" | "operator" | "or" | "or_eq" | "private"
            | "protected" | "public" | "register" | "reinterpret_cast" | "requires" | "return"
            | "short" | "signed" | "sizeof" | "static" | "static_assert" | "static_cast"
            | "struct" | "switch" | "template" | "this" | "thread_local" | "throw" | "true"
            | "try" | "typedef" | "typeid" | "typename" | "union" | "unsigned" | "using"
            | "virtual" | "void" | "volatile" | "wchar_t" | "while" | "xor" | "xor_eq"
            | "__attribute__" | "__declspec" | "__restrict" | "__inline"
    )
}

/// Built-in type words: a declarator name may follow them directly.
pub(crate) fn is_type_keyword(s: &str) -> bool {
    matches!(
        s,
        "auto" | "bool" | "char" | "char8_t" | "char16_t" | "char32_t" | "double" | "float"
            | "int" | "long" | "short" | "signed" | "unsigned" | "void" | "wchar_t"
    )
}
