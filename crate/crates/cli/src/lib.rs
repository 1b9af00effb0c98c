//! Command-line front end for `apot`.

pub mod opfile;
pub mod report;

mod commands;

pub use commands::{run, Cli, CliError, Command};
