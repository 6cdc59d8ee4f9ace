//! Files for a local multi-process network: one genesis, one key and one
//! config per validator.

use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use poa_core::anchoring::AnchorPolicy;
use poa_core::consensus::ConsensusConfig;
use poa_core::genesis::{Allocation, Genesis};
use poa_core::KeyPair;
use serde::Serialize;

use crate::config::{AnchoringConfig, ExplorerConfig, GossipConfig, NodeConfig, WitnessAdapter};
use crate::error::CliError;
use crate::keyfile::write_key;

#[derive(Clone, Debug)]
pub struct TestnetSpec {
    pub validators: usize,
    pub gossip_ports: Vec<u16>,
    pub explorer_ports: Vec<u16>,
    pub allocation: u128,
    pub consensus: ConsensusConfig,
    pub anchor_interval_seconds: u64,
    pub genesis_timestamp: u64,
}

impl TestnetSpec {
    pub fn new(validators: usize, base_port: u16, genesis_timestamp: u64) -> Self {
        Self {
            validators,
            gossip_ports: (0..validators as u16).map(|i| base_port + i).collect(),
            explorer_ports: (0..validators as u16)
                .map(|i| base_port + 100 + i)
                .collect(),
            allocation: 1_000_000_000_000,
            consensus: ConsensusConfig::default(),
            anchor_interval_seconds: 60,
            genesis_timestamp,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestnetNode {
    pub address: poa_core::Address,
    pub config: PathBuf,
    pub gossip: SocketAddr,
    pub explorer: SocketAddr,
}

#[derive(Clone, Debug, Serialize)]
pub struct TestnetLayout {
    pub genesis: PathBuf,
    pub nodes: Vec<TestnetNode>,
}

fn local(port: u16) -> SocketAddr {
    SocketAddr::from((Ipv4Addr::LOCALHOST, port))
}

/// Writes `dir/genesis.json` and `dir/node-<i>/{key.json,config.json}`.
/// Node 0 anchors to `dir/witness.json`.
pub fn init(dir: &Path, spec: &TestnetSpec) -> Result<TestnetLayout, CliError> {
    if spec.validators == 0
        || spec.gossip_ports.len() != spec.validators
        || spec.explorer_ports.len() != spec.validators
    {
        return Err(CliError::InvalidArgument(
            "need one gossip and one explorer port per validator".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let keys: Vec<KeyPair> = (0..spec.validators)
        .map(|_| KeyPair::generate(&mut rand::rngs::OsRng))
        .collect();
    let genesis = Genesis {
        allocations: keys
            .iter()
            .map(|k| Allocation {
                address: k.address(),
                amount: spec.allocation,
            })
            .collect(),
        consensus: spec.consensus,
        ..Genesis::new(
            keys.iter().map(KeyPair::address).collect(),
            spec.genesis_timestamp,
        )
    };
    genesis.validate().map_err(|source| CliError::Genesis {
        path: dir.join("genesis.json"),
        source,
    })?;
    let genesis_path = dir.join("genesis.json");
    write_json(&genesis_path, &genesis)?;

    let mut nodes = Vec::new();
    for (i, key) in keys.iter().enumerate() {
        let node_dir = dir.join(format!("node-{i}"));
        std::fs::create_dir_all(&node_dir).map_err(CliError::io(&node_dir))?;
        write_key(&node_dir.join("key.json"), key)?;
        let witness = if i == 0 {
            WitnessAdapter::File {
                path: PathBuf::from("../witness.json"),
            }
        } else {
            WitnessAdapter::Disabled
        };
        let cfg = NodeConfig {
            key_file: Some("key.json".into()),
            genesis: "../genesis.json".into(),
            data_dir: "data".into(),
            gossip: GossipConfig {
                listen: local(spec.gossip_ports[i]),
                peers: (0..spec.validators)
                    .filter(|&j| j != i)
                    .map(|j| local(spec.gossip_ports[j]))
                    .collect(),
            },
            explorer: ExplorerConfig {
                listen: Some(local(spec.explorer_ports[i])),
                tokens: vec![],
            },
            anchoring: AnchoringConfig {
                policy: AnchorPolicy::with_interval(spec.anchor_interval_seconds),
                witness,
            },
        };
        let config = node_dir.join("config.json");
        std::fs::write(&config, cfg.to_json() + "\n").map_err(CliError::io(&config))?;
        nodes.push(TestnetNode {
            address: key.address(),
            config,
            gossip: local(spec.gossip_ports[i]),
            explorer: local(spec.explorer_ports[i]),
        });
    }
    Ok(TestnetLayout {
        genesis: genesis_path,
        nodes,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut body = serde_json::to_vec_pretty(value).expect("value serializes");
    body.push(b'\n');
    std::fs::write(path, body).map_err(CliError::io(path))
}
