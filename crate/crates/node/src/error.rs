use std::path::PathBuf;

use poa_core::anchoring::{AnchorLogError, VerificationReport};
use poa_core::docstore::DocStoreError;
use poa_core::execution::TxError;
use poa_core::export::ExportError;
use poa_core::genesis::GenesisError;
use poa_core::validation::ValidationReport;
use serde_json::{json, Value};
use thiserror::Error;

/// Every failure the CLI can report. Each variant has one stable code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("genesis {path}: {source}")]
    Genesis { path: PathBuf, source: GenesisError },
    #[error("key file {path} already exists")]
    KeyFileExists { path: PathBuf },
    #[error("key file {path}: {message}")]
    KeyFile { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("data directory {path} holds an invalid chain")]
    CorruptDataDir {
        path: PathBuf,
        report: Box<ValidationReport>,
    },
    #[error("chain export: {0}")]
    Export(#[from] ExportError),
    #[error("chain does not validate against genesis")]
    ChainInvalid { report: Box<ValidationReport> },
    #[error("chain disagrees with the witness")]
    AnchorMismatch { report: Box<VerificationReport> },
    #[error("anchor log: {0}")]
    AnchorLog(#[from] AnchorLogError),
    #[error("transaction rejected: {0}")]
    Tx(TxError),
    #[error("transaction {digest} reverted: {reason}")]
    Reverted { digest: String, reason: String },
    #[error("transaction {digest} not included within {seconds} s")]
    NotIncluded { digest: String, seconds: u64 },
    #[error("document store: {0}")]
    DocStore(#[from] DocStoreError),
    #[error("node unreachable at {endpoint}: {message}")]
    Unreachable { endpoint: String, message: String },
    #[error("simulation: {0}")]
    Simulation(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "ConfigInvalid",
            CliError::Genesis { .. } => "GenesisInvalid",
            CliError::KeyFileExists { .. } => "KeyFileExists",
            CliError::KeyFile { .. } => "KeyFileInvalid",
            CliError::Io { .. } => "IoError",
            CliError::InvalidArgument(_) => "InvalidArgument",
            CliError::CorruptDataDir { .. } => "CorruptDataDir",
            CliError::Export(_) => "ExportMalformed",
            CliError::ChainInvalid { .. } => "ChainInvalid",
            CliError::AnchorMismatch { .. } => "AnchorMismatch",
            CliError::AnchorLog(_) => "AnchorLogInvalid",
            CliError::Tx(e) => e.code(),
            CliError::Reverted { .. } => "Reverted",
            CliError::NotIncluded { .. } => "NotIncluded",
            CliError::DocStore(e) => e.code(),
            CliError::Unreachable { .. } => "NodeUnreachable",
            CliError::Simulation(_) => "SimulationInvalid",
        }
    }

    /// Machine-readable form printed on stderr.
    pub fn to_json(&self) -> Value {
        let mut v = json!({ "error": self.code(), "message": self.to_string() });
        match self {
            CliError::CorruptDataDir { report, .. } | CliError::ChainInvalid { report } => {
                v["report"] = serde_json::to_value(report).expect("report serializes");
            }
            CliError::AnchorMismatch { report } => {
                v["earliest_mismatch"] = json!(report.earliest_mismatch);
                v["report"] = serde_json::to_value(report).expect("report serializes");
            }
            _ => {}
        }
        v
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
