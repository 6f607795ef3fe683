//! Batch front end for the camouflage toolkit: single-stage commands and a
//! partition, camouflage, recombine pipeline with a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use commands::{run, Cli, Command};
pub use config::{split_seed, Method, PipelineConfig};
pub use error::{exit, CliError};
pub use pipeline::{pair_pieces, run_pipeline, Manifest, PairFlag, Pairing, RunMetrics};
