use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use poa_core::{Address, KeyPair};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyFile {
    address: Address,
    public_key: String,
    secret_key: String,
}

/// Generates a fresh key from the OS RNG and writes it to `path`.
pub fn generate(path: &Path) -> Result<KeyPair, CliError> {
    let key = KeyPair::generate(&mut rand::rngs::OsRng);
    write_key(path, &key)?;
    Ok(key)
}

/// Writes `key` to a new file readable only by its owner.
pub fn write_key(path: &Path, key: &KeyPair) -> Result<(), CliError> {
    let body = KeyFile {
        address: key.address(),
        public_key: hex::encode(key.public_key().0),
        secret_key: hex::encode(key.secret()),
    };
    let mut opts = OpenOptions::new();
    opts.write(true).create_new(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut file = opts.open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::AlreadyExists => CliError::KeyFileExists {
            path: path.to_owned(),
        },
        _ => CliError::Io {
            path: path.to_owned(),
            source: e,
        },
    })?;
    let mut json = serde_json::to_vec_pretty(&body).expect("key file serializes");
    json.push(b'\n');
    file.write_all(&json).map_err(CliError::io(path))
}

pub fn read_key(path: &Path) -> Result<KeyPair, CliError> {
    let bad = |message: String| CliError::KeyFile {
        path: path.to_owned(),
        message,
    };
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    let file: KeyFile = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
    let secret: [u8; 32] = hex::decode(&file.secret_key)
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| bad("secret_key must be 64 hex characters".into()))?;
    let key = KeyPair::from_secret(secret);
    if hex::encode(key.public_key().0) != file.public_key.to_lowercase() {
        return Err(bad("public_key does not match secret_key".into()));
    }
    if key.address() != file.address {
        return Err(bad("address does not match public_key".into()));
    }
    Ok(key)
}
