//! Materials-synthesis process informatics toolkit.
//!
//! The crate compiles provenance records into typed process graphs
//! ([`provgraph`]), generates a seven-task multiple-choice benchmark from them
//! ([`taskgen`]), partitions it under four distribution-shift protocols
//! ([`splitter`]), builds a train-only process memory ([`memory`]), retrieves
//! analogous precedents ([`retrieval`]), scores answer options
//! ([`scoring`]) and evaluates answer policies including the ablation grid
//! ([`runner`]). The [`cli`] module wires everything behind one binary.
//!
//! Runnable walk-throughs for each capability live in `examples/`.

pub mod cli;
pub mod error;
pub mod jsonl;
pub mod memory;
pub mod provgraph;
pub mod retrieval;
pub mod runner;
pub mod scoring;
pub mod seed;
pub mod splitter;
pub mod taskgen;

pub use error::{Error, Result};

/// Version string embedded in every artifact header.
pub const TOOL_VERSION: &str = concat!("matproc/", env!("CARGO_PKG_VERSION"));
