//! Configuration, file formats and subcommands of the `spacefill` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod external;
pub mod io;

pub use commands::{cmd_oracle, cmd_run, cmd_w1, load_experiment, Manifest, OracleKind};
pub use config::{Experiment, ModelConfig, TargetConfig};
pub use error::{CliError, CliResult, EXIT_CONFIG, EXIT_RUNTIME};
