//! Knowledge-base question answering over query graphs.
//!
//! A question is linked to focus nodes, parsed into candidate query graphs
//! by staged search over an in-memory triple store, and the answering graph
//! is chosen in two stages: a ranker scores every candidate against the
//! question, then a reranker rescores the top-n with an extra answer-type
//! channel and the best graph is executed.

pub mod embedding;
pub mod error;
pub mod kb;
pub mod linking;
pub mod matcher;
pub mod metrics;
pub mod pipeline;
pub mod query_graph;
pub mod ranking;
pub mod reranking;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
