//! Conversational query reformulation guided by retrieved documents.
//!
//! The pipeline retrieves a pool of documents for the baseline query, re-ranks
//! them with two embedding stages, mines keywords and answer spans from the
//! top documents, filters those against the conversation and appends the
//! survivors to the query. `trec` scores the resulting runs.

pub mod corpus;
pub mod embedding;
pub mod enrichment;
pub mod error;
pub mod filter;
pub mod guided;
mod http;
pub mod pipeline;
pub mod trec;

pub use error::{Error, Result};
