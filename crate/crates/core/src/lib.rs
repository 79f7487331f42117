//! Targeted syntactic evaluation of incremental language models.
//!
//! The crate is organised around the life cycle of an experiment:
//!
//! * [`suite`] holds the region-partitioned minimal-pair corpus and renders
//!   every (item, condition) into sentences with exact character spans.
//! * [`template`] expands seeded slot templates into suites, exhaustively or
//!   by deterministic sampling.
//! * [`protocol`] is the scoring interface every backend speaks, in process
//!   or over newline-delimited JSON, plus token-to-region alignment.
//! * [`ngram`] is an interpolated Kneser-Ney n-gram model that serves as the
//!   built-in reference backend.
//! * [`oracle`] is a programmable mock backend with exact ground truth.
//! * [`metrics`] evaluates signed sums of region surprisals per item.
//! * [`stats`] summarises by-item values with within-item confidence
//!   intervals and paired sign-flip permutation tests.
//! * [`harness`] and [`report`] tie the pieces together into score files,
//!   report tables and run manifests.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod ngram;
pub mod oracle;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod stats;
pub mod suite;
pub mod template;

pub use error::{Error, ErrorKind, Result};
