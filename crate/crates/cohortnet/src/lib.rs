//! Batch analytics over forum interaction logs: ingestion, orchestration,
//! CSV/JSON/Markdown export and the `cohortnet` command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod synth_io;

pub use error::{Error, Result};
