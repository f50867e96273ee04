//! Front end for the `cloudprice` binary: config loading, subcommands and the
//! reference-value suite.

pub mod commands;
pub mod config;
pub mod suite;

pub use commands::{CliError, PriceChoice, Report, Scheme};
pub use config::{ConfigError, Instance, InstanceConfig, Model};
