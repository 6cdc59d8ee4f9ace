//! Content-addressed off-chain document store with on-chain registration.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{DOCUMENT_REGISTRY, LINK_SCHEME};
use crate::execution::document_record;
use crate::gas::GasSchedule;
use crate::hash::{digest, Digest};
use crate::keys::KeyPair;
use crate::state::WorldState;
use crate::tx::{ContractCall, Transaction, TxKind};

pub const DEFAULT_MAX_DOCUMENT_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredDocument {
    pub digest: Digest,
    pub link: String,
    pub size_bytes: u64,
    pub created_at: u64,
}

#[derive(Debug, Error)]
pub enum DocStoreError {
    #[error("document of {size} bytes exceeds the {max} byte limit")]
    TooLarge { size: u64, max: u64 },
    #[error("storage failure at {path}: {source}")]
    StorageFailure { path: PathBuf, source: io::Error },
    #[error("document {0} is not registered on chain")]
    NotRegistered(Digest),
    #[error("link {0} cannot be resolved in this store")]
    LinkUnresolvable(String),
    #[error("stored bytes hash to {actual}, expected {expected}")]
    IntegrityMismatch { expected: Digest, actual: Digest },
}

impl DocStoreError {
    pub fn code(&self) -> &'static str {
        match self {
            DocStoreError::TooLarge { .. } => "TooLarge",
            DocStoreError::StorageFailure { .. } => "StorageFailure",
            DocStoreError::NotRegistered(_) => "NotRegistered",
            DocStoreError::LinkUnresolvable(_) => "LinkUnresolvable",
            DocStoreError::IntegrityMismatch { .. } => "IntegrityMismatch",
        }
    }
}

pub fn link_for(digest: &Digest) -> String {
    format!("{LINK_SCHEME}{}", digest.to_hex())
}

/// Parses a `store://<hex>` link.
pub fn parse_link(link: &str) -> Option<Digest> {
    link.strip_prefix(LINK_SCHEME)?.parse().ok()
}

/// Files live at `root/ab/cd/<hex>` with a `<hex>.json` metadata sidecar.
#[derive(Clone, Debug)]
pub struct DocStore {
    root: PathBuf,
    max_bytes: u64,
}

impl DocStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, DocStoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| DocStoreError::StorageFailure {
            path: root.clone(),
            source,
        })?;
        Ok(Self {
            root,
            max_bytes: DEFAULT_MAX_DOCUMENT_BYTES,
        })
    }

    pub fn with_max_bytes(mut self, max_bytes: u64) -> Self {
        self.max_bytes = max_bytes;
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, digest: &Digest) -> PathBuf {
        let hex = digest.to_hex();
        self.root.join(&hex[0..2]).join(&hex[2..4]).join(hex)
    }

    fn meta_path(&self, digest: &Digest) -> PathBuf {
        self.path_for(digest).with_extension("json")
    }

    /// Persists `bytes`. Storing identical bytes again returns the original record.
    pub fn store_document(&self, bytes: &[u8]) -> Result<StoredDocument, DocStoreError> {
        let size = bytes.len() as u64;
        if size > self.max_bytes {
            return Err(DocStoreError::TooLarge {
                size,
                max: self.max_bytes,
            });
        }
        let d = digest(bytes);
        let path = self.path_for(&d);
        let meta_path = self.meta_path(&d);
        if path.exists() {
            if let Ok(meta) = fs::read(&meta_path) {
                if let Ok(doc) = serde_json::from_slice::<StoredDocument>(&meta) {
                    return Ok(doc);
                }
            }
        }
        let doc = StoredDocument {
            digest: d,
            link: link_for(&d),
            size_bytes: size,
            created_at: unix_now(),
        };
        let dir = path.parent().expect("fan-out directory");
        fs::create_dir_all(dir).map_err(|source| DocStoreError::StorageFailure {
            path: dir.to_owned(),
            source,
        })?;
        write_atomic(&path, bytes)?;
        write_atomic(
            &meta_path,
            &serde_json::to_vec(&doc).expect("record serializes"),
        )?;
        Ok(doc)
    }

    pub fn resolve_link(&self, link: &str) -> Result<PathBuf, DocStoreError> {
        let d =
            parse_link(link).ok_or_else(|| DocStoreError::LinkUnresolvable(link.to_string()))?;
        let path = self.path_for(&d);
        if !path.is_file() {
            return Err(DocStoreError::LinkUnresolvable(link.to_string()));
        }
        Ok(path)
    }

    /// Reads the document behind `link` and checks it hashes to `expected`.
    pub fn read_verified(&self, link: &str, expected: &Digest) -> Result<Vec<u8>, DocStoreError> {
        let path = self.resolve_link(link)?;
        let bytes = fs::read(&path).map_err(|source| DocStoreError::StorageFailure {
            path: path.clone(),
            source,
        })?;
        let actual = digest(&bytes);
        if actual != *expected {
            return Err(DocStoreError::IntegrityMismatch {
                expected: *expected,
                actual,
            });
        }
        Ok(bytes)
    }

    /// Looks `d` up in the on-chain registry, follows the stored link and
    /// returns the bytes only if they hash to `d`.
    pub fn fetch_and_verify(
        &self,
        state: &WorldState,
        d: &Digest,
    ) -> Result<Vec<u8>, DocStoreError> {
        let record = document_record(state, d).ok_or(DocStoreError::NotRegistered(*d))?;
        self.read_verified(&record.link, d)
    }
}

/// Gas needed to register `doc`: intrinsic cost plus one storage write.
pub fn registration_gas(doc: &StoredDocument, schedule: &GasSchedule) -> u64 {
    let kind = registration_kind(doc);
    let payload = kind.payload_len() as u64;
    schedule.base_cost(&kind) + payload * schedule.per_payload_byte + schedule.per_storage_write
}

fn registration_kind(doc: &StoredDocument) -> TxKind {
    TxKind::ContractCall {
        contract: DOCUMENT_REGISTRY,
        call: ContractCall::RegisterDocument {
            digest: doc.digest,
            link: doc.link.clone(),
        },
    }
}

/// Signed registry call for `doc`.
pub fn register_on_chain(
    doc: &StoredDocument,
    sender: &KeyPair,
    nonce: u64,
    gas_limit: u64,
) -> Transaction {
    Transaction::signed(sender, nonce, gas_limit, registration_kind(doc))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DocStoreError> {
    let fail = |source| DocStoreError::StorageFailure {
        path: path.to_owned(),
        source,
    };
    let dir = path.parent().expect("file has a parent");
    let mut tmp = tempfile_in(dir).map_err(fail)?;
    tmp.1
        .write_all(bytes)
        .and_then(|_| tmp.1.sync_all())
        .map_err(fail)?;
    fs::rename(&tmp.0, path).map_err(fail)
}

fn tempfile_in(dir: &Path) -> io::Result<(PathBuf, fs::File)> {
    for attempt in 0u32..100 {
        let name = format!(".tmp-{}-{}-{attempt}", std::process::id(), unix_nanos());
        let path = dir.join(name);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(f) => return Ok((path, f)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    Err(io::Error::new(
        io::ErrorKind::AlreadyExists,
        "could not create a temporary file",
    ))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn unix_nanos() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0)
}
