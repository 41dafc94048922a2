//! Air-quality risk classification with a small feed-forward network, plus
//! a debounced alarm for replaying sensor streams.
//!
//! The crate is organised as the data flows: [`ingest`] parses the raw CSV,
//! [`preprocess`] scales and labels rows, [`ann`] trains and runs the
//! network, [`metrics`] scores it, and [`alarm`] turns per-frame
//! predictions into alert events. [`pipeline`] chains the first four for a
//! hold-out run; [`cli`] exposes everything as subcommands.

pub mod alarm;
pub mod ann;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;

pub use error::{Error, Result};
