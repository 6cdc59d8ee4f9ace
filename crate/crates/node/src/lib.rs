//! Validator node runtime and the plumbing behind the `poa` command.

pub mod client;
pub mod config;
pub mod error;
pub mod keyfile;
pub mod net;
pub mod runtime;
pub mod testnet;

pub use config::NodeConfig;
pub use error::CliError;
