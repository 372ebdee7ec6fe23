//! File formats, run configuration, pipeline stages and the command-line
//! front end for `lexspec-core`.

#[macro_use]
pub mod diag;

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod gradcheck;
pub mod meta;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
