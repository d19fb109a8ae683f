//! Experiment harness for the `vbts` library: TOML-configured Monte Carlo
//! runs, dataset ingestion, CSV traces, summary tables and SVG regret plots.

pub mod config;
pub mod diagnose;
mod error;
pub mod experiment;
pub mod ingest;
pub mod plot;
pub mod report;
pub mod seeds;
pub mod sweep;

pub use error::{HarnessError, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}
