use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use poa_core::anchoring::AnchorPolicy;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything `node run` needs, loaded from one JSON file. Relative paths are
/// resolved against the directory holding the config file.
///
/// Chain parameters (validators, consensus timing, gas schedule) live in the
/// genesis file so that every node agrees on them.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    /// Absent for a follower that verifies but never seals.
    #[serde(default)]
    pub key_file: Option<PathBuf>,
    pub genesis: PathBuf,
    pub data_dir: PathBuf,
    pub gossip: GossipConfig,
    #[serde(default)]
    pub explorer: ExplorerConfig,
    #[serde(default)]
    pub anchoring: AnchoringConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GossipConfig {
    pub listen: SocketAddr,
    #[serde(default)]
    pub peers: Vec<SocketAddr>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorerConfig {
    /// `None` disables the explorer.
    #[serde(default)]
    pub listen: Option<SocketAddr>,
    /// Bearer tokens; empty means open access.
    #[serde(default)]
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchoringConfig {
    #[serde(default)]
    pub policy: AnchorPolicy,
    #[serde(default)]
    pub witness: WitnessAdapter,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessAdapter {
    #[default]
    Disabled,
    /// Local JSON file standing in for a public chain.
    File { path: PathBuf },
}

impl NodeConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(CliError::io(path))?;
        let cfg: NodeConfig = serde_json::from_slice(&bytes).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| CliError::Config {
            path: path.to_owned(),
            message,
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.anchoring.policy.is_valid() {
            return Err("anchoring policy values must be positive".into());
        }
        if self.gossip.peers.contains(&self.gossip.listen) {
            return Err("gossip peers include the node's own listen address".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Copy with every relative path joined onto `base`.
    pub fn resolved(&self, base: &Path) -> NodeConfig {
        let join = |p: &Path| {
            if p.is_absolute() {
                p.to_owned()
            } else {
                base.join(p)
            }
        };
        let mut cfg = self.clone();
        cfg.key_file = self.key_file.as_deref().map(join);
        cfg.genesis = join(&self.genesis);
        cfg.data_dir = join(&self.data_dir);
        if let WitnessAdapter::File { path } = &self.anchoring.witness {
            cfg.anchoring.witness = WitnessAdapter::File { path: join(path) };
        }
        cfg
    }

    pub fn chain_file(&self) -> PathBuf {
        self.data_dir.join("chain.bin")
    }

    pub fn anchor_log_file(&self) -> PathBuf {
        self.data_dir.join("anchors.jsonl")
    }

    pub fn docstore_dir(&self) -> PathBuf {
        self.data_dir.join("documents")
    }
}
