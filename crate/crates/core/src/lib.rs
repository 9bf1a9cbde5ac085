//! Crash report deduplication and clustering by call-stack similarity.
//!
//! The pipeline loads GDB-style crash reports ([`ingest`]), removes libc
//! abort chains from the top of each stack ([`preprocess`]), compares stacks
//! with a position-weighted longest-common-subsequence score
//! ([`similarity`]), and groups reports with complete-linkage hierarchical
//! clustering cut at a distance threshold ([`hac`]). Exact duplicates can be
//! removed beforehand ([`dedup`]).
pub mod cli;
pub mod dedup;
pub mod error;
pub mod hac;
pub mod ingest;
pub mod matrix;
pub mod model;
pub mod preprocess;
pub mod similarity;

pub use error::{Error, Result};
pub use model::{CallStack, CrashReport, Frame, Mapping, SimilarityConfig};
