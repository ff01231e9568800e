//! Scenario files, CSV formats, parallel runners and the command line for
//! [`kriglab_core`].

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod runner;

pub use error::{CliError, Result};
