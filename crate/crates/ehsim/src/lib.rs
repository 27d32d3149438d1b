//! File formats, configuration loading and batch runs around [`ehsim_core`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod sweep;
pub mod trace_io;

pub use config::{apply_overrides, load_config, parse_config, Override};
pub use error::{Error, Result};
pub use ingest::{ingest, ingest_path};
pub use sweep::{expand, par_sweep, summarize, RunSummary, Vary};
pub use trace_io::{write_trace, Format, CSV_HEADER};
