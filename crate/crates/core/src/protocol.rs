//! Line-delimited JSON tool protocol: one [`ToolRequest`] per input line,
//! one [`ToolResponse`] per output line, in order.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::index::StructuralIndex;
use crate::intent::{query_code_intent, EmbeddingProvider, IntentError, IntentHit, IntentIndex, DEFAULT_K};
use crate::query::{
    defect_subgraph, filter_by_signature, find_class, find_function, get_function_calls, get_inheritance_chain,
    grep_sources, DefectSubgraph, FunctionCall, GrepHit, InheritanceChain, QueryError, QueryMatch, DEFAULT_HOP_LIMIT,
};

pub const TOOLS: [&str; 7] = [
    "FindClass",
    "FindFunction",
    "GetInheritanceChain",
    "GetFunctionCalls",
    "QueryCodeIntent",
    "GrepBaseline",
    "DefectSubgraph",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRequest {
    pub request_id: String,
    pub tool: String,
    #[serde(default)]
    pub args: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum ToolPayload {
    Matches(Vec<QueryMatch>),
    Chain(InheritanceChain),
    Calls(Vec<FunctionCall>),
    IntentHits(Vec<IntentHit>),
    Grep(Vec<GrepHit>),
    Subgraph(DefectSubgraph),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub request_id: String,
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<ToolPayload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ToolResponse {
    pub fn ok(request_id: impl Into<String>, payload: ToolPayload) -> ToolResponse {
        ToolResponse {
            request_id: request_id.into(),
            status: ResponseStatus::Ok,
            payload: Some(payload),
            error_kind: None,
            message: None,
        }
    }

    pub fn error(request_id: impl Into<String>, kind: &str, message: impl Into<String>) -> ToolResponse {
        ToolResponse {
            request_id: request_id.into(),
            status: ResponseStatus::Error,
            payload: None,
            error_kind: Some(kind.to_string()),
            message: Some(message.into()),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("responses always serialize")
    }
}

/// Everything a tool call may read.
pub struct ToolContext<'a> {
    pub index: &'a StructuralIndex,
    pub intent: Option<&'a IntentIndex>,
    pub provider: &'a dyn EmbeddingProvider,
    pub default_k: usize,
    pub default_hop_limit: usize,
}

impl<'a> ToolContext<'a> {
    pub fn new(
        index: &'a StructuralIndex,
        intent: Option<&'a IntentIndex>,
        provider: &'a dyn EmbeddingProvider,
    ) -> ToolContext<'a> {
        ToolContext {
            index,
            intent,
            provider,
            default_k: DEFAULT_K,
            default_hop_limit: DEFAULT_HOP_LIMIT,
        }
    }
}

struct Failure(&'static str, String);

fn query_err(e: QueryError) -> Failure {
    let kind = match &e {
        QueryError::NotFound(_) => "NotFound",
        QueryError::ScopeNotFound(_) => "ScopeNotFound",
        QueryError::AmbiguousName { .. } => "AmbiguousName",
        QueryError::UnknownClass(_) => "UnknownClass",
        QueryError::UnknownFunction { .. } => "UnknownFunction",
        QueryError::NoSeedsResolved => "NoSeedsResolved",
    };
    Failure(kind, e.to_string())
}

fn intent_err(e: IntentError) -> Failure {
    let kind = match &e {
        IntentError::EmptyIndex => "EmptyIndex",
        IntentError::InvalidK => "BadRequest",
        IntentError::ProviderMismatch { .. } => "ProviderMismatch",
        IntentError::Embed(crate::intent::EmbedError::ProviderUnavailable(_)) => "ProviderUnavailable",
        IntentError::Embed(_) => "EmbeddingError",
        _ => "IntentError",
    };
    Failure(kind, e.to_string())
}

fn bad(message: impl Into<String>) -> Failure {
    Failure("BadRequest", message.into())
}

fn str_arg<'v>(args: &'v Map<String, Value>, key: &str) -> Result<&'v str, Failure> {
    match args.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(bad(format!("argument {key:?} must be a string"))),
        None => Err(bad(format!("missing argument {key:?}"))),
    }
}

fn opt_str_arg<'v>(args: &'v Map<String, Value>, key: &str) -> Result<&'v str, Failure> {
    match args.get(key) {
        None | Some(Value::Null) => Ok(""),
        _ => str_arg(args, key),
    }
}

fn usize_arg(args: &Map<String, Value>, key: &str, default: usize) -> Result<usize, Failure> {
    match args.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(Value::Number(n)) => n
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| bad(format!("argument {key:?} must be a nonnegative integer"))),
        Some(Value::String(s)) => s
            .parse()
            .map_err(|_| bad(format!("argument {key:?} must be a nonnegative integer"))),
        Some(_) => Err(bad(format!("argument {key:?} must be a nonnegative integer"))),
    }
}

fn list_arg(args: &Map<String, Value>, key: &str) -> Result<Vec<String>, Failure> {
    match args.get(key) {
        Some(Value::String(s)) => Ok(s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad(format!("{key:?} must hold strings"))))
            .collect(),
        Some(_) => Err(bad(format!("argument {key:?} must be a list of strings"))),
        None => Err(bad(format!("missing argument {key:?}"))),
    }
}

fn run_tool(ctx: &ToolContext<'_>, tool: &str, args: &Map<String, Value>) -> Result<ToolPayload, Failure> {
    match tool {
        "FindClass" => {
            let name = str_arg(args, "name")?;
            find_class(ctx.index, name).map(ToolPayload::Matches).map_err(query_err)
        }
        "FindFunction" => {
            let scope = opt_str_arg(args, "scope")?;
            let name = str_arg(args, "name")?;
            let mut found = find_function(ctx.index, scope, name).map_err(query_err)?;
            let signature = opt_str_arg(args, "signature")?;
            if !signature.is_empty() {
                found = filter_by_signature(&found, signature);
            }
            Ok(ToolPayload::Matches(found))
        }
        "GetInheritanceChain" => {
            let name = str_arg(args, "class_name")?;
            get_inheritance_chain(ctx.index, name).map(ToolPayload::Chain).map_err(query_err)
        }
        "GetFunctionCalls" => {
            let class = opt_str_arg(args, "class_name")?;
            let function = str_arg(args, "function_name")?;
            get_function_calls(ctx.index, class, function)
                .map(ToolPayload::Calls)
                .map_err(query_err)
        }
        "QueryCodeIntent" => {
            let q = str_arg(args, "query")?;
            let k = usize_arg(args, "k", ctx.default_k)?;
            let intent = ctx
                .intent
                .ok_or_else(|| Failure("EmptyIndex", "no intent index loaded".into()))?;
            query_code_intent(intent, ctx.provider, q, k)
                .map(ToolPayload::IntentHits)
                .map_err(intent_err)
        }
        "GrepBaseline" => {
            let pattern = str_arg(args, "pattern")?;
            let files = ctx.index.sources.iter().map(|(p, c)| (p.as_str(), c.as_str()));
            Ok(ToolPayload::Grep(grep_sources(files, pattern)))
        }
        "DefectSubgraph" => {
            let seeds = list_arg(args, "seeds")?;
            let hops = usize_arg(args, "hop_limit", ctx.default_hop_limit)?;
            defect_subgraph(ctx.index, &seeds, hops)
                .map(ToolPayload::Subgraph)
                .map_err(query_err)
        }
        other => Err(Failure("UnknownTool", format!("unknown tool {other:?}"))),
    }
}

/// Executes one request. Never panics on bad input; problems become error
/// responses.
pub fn dispatch(ctx: &ToolContext<'_>, request: &ToolRequest) -> ToolResponse {
    match run_tool(ctx, &request.tool, &request.args) {
        Ok(payload) => ToolResponse::ok(request.request_id.clone(), payload),
        Err(Failure(kind, message)) => ToolResponse::error(request.request_id.clone(), kind, message),
    }
}

/// Handles one raw input line; `None` for blank lines.
pub fn handle_line(ctx: &ToolContext<'_>, line: &str) -> Option<ToolResponse> {
    if line.trim().is_empty() {
        return None;
    }
    match serde_json::from_str::<ToolRequest>(line) {
        Ok(req) => Some(dispatch(ctx, &req)),
        Err(e) => {
            // Echo the id when the line is JSON with a usable request_id.
            let id = serde_json::from_str::<Value>(line)
                .ok()
                .and_then(|v| v.get("request_id").and_then(Value::as_str).map(str::to_string))
                .unwrap_or_default();
            Some(ToolResponse::error(id, "BadRequest", format!("malformed request: {e}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServeStats {
    pub requests: usize,
    pub errors: usize,
}

/// Serves requests until end of input. Each response is flushed before the
/// next line is read.
pub fn serve<R: BufRead, W: Write>(ctx: &ToolContext<'_>, input: R, mut output: W) -> std::io::Result<ServeStats> {
    let mut stats = ServeStats::default();
    for line in input.lines() {
        let line = line?;
        let Some(resp) = handle_line(ctx, &line) else {
            continue;
        };
        stats.requests += 1;
        if resp.status == ResponseStatus::Error {
            stats.errors += 1;
        }
        writeln!(output, "{}", resp.to_line())?;
        output.flush()?;
    }
    Ok(stats)
}
