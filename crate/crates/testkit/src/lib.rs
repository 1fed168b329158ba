//! Random inputs and brute-force reference answers for cppscope tests.
//!
//! Nothing here depends on the crate under test. The corpus generator knows
//! what it wrote, so symbols, edges and query answers are derived from the
//! generation plan rather than by parsing the output.

pub mod corpus;
pub mod oracles;
pub mod patches;

pub use corpus::{generate, Corpus, CorpusConfig, RefEdge, RefEdgeKind, RefSymbol};
