//! Experiment harness for the `chc-core` scheme: configuration files, the
//! convergence and stability studies, output formats and the command line.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod output;
pub mod parallel;
pub mod setup;
pub mod studies;

pub use config::{Config, StudyKind};
pub use error::{Error, Result};
pub use output::{Check, StudyOutput, Table};
