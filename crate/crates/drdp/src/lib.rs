//! Configuration, experiment pipelines and the `drdp` command-line tool built
//! on [`drdp_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod format;
pub mod pipeline;

pub use error::{CliError, Result};
