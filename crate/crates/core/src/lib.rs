//! Structural and semantic indexing of C++ repositories.
//!
//! The crate is organised around the stages an issue-resolution agent goes
//! through:
//!
//! - [`repo`]: repositories, issues, unified diffs, patch application and
//!   sandboxed test execution.
//! - [`cpp`] and [`index`]: a recovering C++ declaration parser and the symbol
//!   graph built from it (containment, inheritance, calls, overloads,
//!   overrides).
//! - [`query`]: deterministic structural lookups over the graph.
//! - [`intent`]: summaries of code artifacts, hashed embeddings and top-k
//!   intent retrieval, plus the intersection with the defect subgraph.
//! - [`pipeline`]: reproduce, generate, prune, validate and select.
//! - [`protocol`]: the line-delimited tool protocol shared by the CLI server
//!   and the patch agent loop.
//! - [`eval`]: file- and function-level localization metrics.

pub mod config;
pub mod cpp;
pub mod eval;
pub mod index;
pub mod intent;
pub mod par;
pub mod pipeline;
pub mod protocol;
pub mod query;
pub mod repo;



pub use index::{build_index, StructuralIndex, SymbolId, SymbolKind, SymbolRecord};
pub use par::Execution;
pub use repo::{load_repository, IssueDescription, PatchCandidate, Repository, SourceUnit};
