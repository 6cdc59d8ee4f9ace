use poa_core::anchoring::{AnchorGap, WitnessRecord};
use poa_core::consensus::EquivocationEvidence;
use poa_core::{Address, Digest};
use serde::{Deserialize, Serialize};

use crate::config::{Behavior, SimConfig};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadRecord {
    pub at_ms: u64,
    pub height: u64,
    pub digest: Digest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub at_ms: u64,
    pub height: u64,
    pub digest: Digest,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTrace {
    pub id: usize,
    pub address: Address,
    pub behavior: Option<Behavior>,
    pub head_history: Vec<HeadRecord>,
    /// Canonical digest at each height, recorded when that height first became final.
    pub finalized: Vec<Digest>,
    /// Heights at which an already final block was later replaced.
    pub finality_reversions: Vec<u64>,
    pub rejections: Vec<Rejection>,
    pub equivocations: Vec<EquivocationEvidence>,
    /// Σ balances and total minted in the final head state.
    pub balance_sum: String,
    pub total_minted: String,
}

impl NodeTrace {
    pub fn head(&self) -> Option<&HeadRecord> {
        self.head_history.last()
    }

    /// Head at virtual time `at_ms` (genesis before the first change).
    pub fn head_at(&self, at_ms: u64) -> Option<&HeadRecord> {
        self.head_history
            .iter()
            .take_while(|h| h.at_ms <= at_ms)
            .last()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProducedRecord {
    pub at_ms: u64,
    pub node: usize,
    pub height: u64,
    pub digest: Digest,
    pub weight: u8,
    pub txs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalEntry {
    pub height: u64,
    pub digest: Digest,
    pub proposer: Address,
    pub scheduled: Address,
    pub weight: u8,
    pub timestamp: u64,
    pub txs: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorEvent {
    pub at_ms: u64,
    pub height: u64,
    pub digest: Digest,
    pub witness_ref: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorFailure {
    pub at_ms: u64,
    pub retry_at_s: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorTrace {
    pub node: usize,
    pub interval_seconds: u64,
    pub anchors: Vec<AnchorEvent>,
    pub failures: Vec<AnchorFailure>,
    pub gaps: Vec<AnchorGap>,
    pub witness: Vec<WitnessRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub duration_s: u64,
    pub canonical_height: u64,
    pub canonical_txs: u64,
    pub blocks_per_second: f64,
    pub tx_per_second: f64,
    pub submitted_txs: u64,
}

/// Everything observable from one run. Serializes deterministically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub config: SimConfig,
    pub duration_s: u64,
    pub nodes: Vec<NodeTrace>,
    pub produced: Vec<ProducedRecord>,
    /// Final canonical chain of the lowest-numbered honest node.
    pub reference_node: usize,
    pub canonical: Vec<CanonicalEntry>,
    pub anchoring: Option<AnchorTrace>,
    pub delivered_messages: u64,
    pub dropped_messages: u64,
    pub metrics: Metrics,
}

impl SimTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    pub fn honest_nodes(&self) -> impl Iterator<Item = &NodeTrace> {
        self.nodes.iter().filter(|n| n.behavior.is_none())
    }
}
