//! Library side of the `swbce` executable: argument definitions, run
//! manifests and the subcommand implementations.

pub mod args;
pub mod commands;
pub mod error;
pub mod manifest;

pub use args::{parse_b_values, Cli, Command};
pub use commands::{execute, run};
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;
