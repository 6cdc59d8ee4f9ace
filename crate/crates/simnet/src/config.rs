use std::collections::BTreeMap;

use poa_core::consensus::ConsensusConfig;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyDistribution {
    Uniform,
    /// Always `min_ms`.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyModel {
    pub min_ms: u64,
    pub max_ms: u64,
    pub distribution: LatencyDistribution,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            min_ms: 20,
            max_ms: 120,
            distribution: LatencyDistribution::Uniform,
        }
    }
}

/// Nodes in different groups cannot reach each other during `[start_s, end_s)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Partition {
    pub start_s: u64,
    pub end_s: u64,
    pub groups: Vec<Vec<usize>>,
}

impl Partition {
    pub fn separates(&self, at_ms: u64, a: usize, b: usize) -> bool {
        if at_ms < self.start_s * 1000 || at_ms >= self.end_s * 1000 {
            return false;
        }
        let group_of = |n: usize| self.groups.iter().position(|g| g.contains(&n));
        group_of(a) != group_of(b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// Seals a second block at each of its heights and splits the two among peers.
    Equivocate,
    /// Never sends anything.
    Withhold,
    /// Signs its blocks with a key that is not registered.
    StaleSign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    /// Transfers submitted per slot, each by a random honest validator.
    pub tx_per_slot: u32,
}

impl Default for Workload {
    fn default() -> Self {
        Self { tx_per_slot: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSettings {
    pub interval_seconds: u64,
    /// Witness outage windows in virtual seconds, half open.
    #[serde(default)]
    pub outages: Vec<(u64, u64)>,
    #[serde(default)]
    pub witness_latency_ms: (u64, u64),
    #[serde(default = "default_retry_base")]
    pub retry_base_seconds: u64,
    /// Node running the agent; defaults to the lowest honest id.
    #[serde(default)]
    pub node: Option<usize>,
}

fn default_retry_base() -> u64 {
    5
}

impl Default for AnchorSettings {
    fn default() -> Self {
        Self {
            interval_seconds: 30,
            outages: vec![],
            witness_latency_ms: (0, 0),
            retry_base_seconds: default_retry_base(),
            node: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_validators: usize,
    pub seed: u64,
    pub latency: LatencyModel,
    /// Probability that any single message is lost.
    pub loss: f64,
    pub partitions: Vec<Partition>,
    pub byzantine: BTreeMap<usize, Behavior>,
    pub workload: Workload,
    pub anchoring: Option<AnchorSettings>,
    pub consensus: ConsensusConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_validators: 7,
            seed: 0,
            latency: LatencyModel::default(),
            loss: 0.0,
            partitions: vec![],
            byzantine: BTreeMap::new(),
            workload: Workload::default(),
            anchoring: Some(AnchorSettings::default()),
            consensus: ConsensusConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn is_honest(&self, node: usize) -> bool {
        !self.byzantine.contains_key(&node)
    }

    pub fn honest_nodes(&self) -> Vec<usize> {
        (0..self.n_validators)
            .filter(|&n| self.is_honest(n))
            .collect()
    }

    pub fn anchor_node(&self) -> Option<usize> {
        let settings = self.anchoring.as_ref()?;
        settings
            .node
            .or_else(|| self.honest_nodes().first().copied())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::ConfigInvalid(msg));
        let n = self.n_validators;
        if n == 0 {
            return invalid("n_validators must be at least 1".into());
        }
        if let Some(&id) = self.byzantine.keys().find(|&&id| id >= n) {
            return invalid(format!("byzantine node {id} out of range"));
        }
        if self.latency.min_ms > self.latency.max_ms {
            return invalid("latency min_ms exceeds max_ms".into());
        }
        if !(0.0..1.0).contains(&self.loss) {
            return invalid("loss must be in [0, 1)".into());
        }
        if !self.consensus.is_valid() {
            return invalid("consensus values must be positive".into());
        }
        for p in &self.partitions {
            if p.start_s >= p.end_s {
                return invalid(format!("partition [{}, {}) is empty", p.start_s, p.end_s));
            }
            let mut seen: Vec<usize> = p.groups.iter().flatten().copied().collect();
            seen.sort_unstable();
            if seen != (0..n).collect::<Vec<_>>() {
                return invalid("partition groups must be a disjoint cover of all nodes".into());
            }
        }
        if let Some(a) = &self.anchoring {
            if a.interval_seconds == 0 || a.retry_base_seconds == 0 {
                return invalid("anchor intervals must be positive".into());
            }
            if a.witness_latency_ms.0 > a.witness_latency_ms.1 {
                return invalid("witness latency min exceeds max".into());
            }
            match self.anchor_node() {
                Some(id) if id < n => {}
                _ => return invalid("anchoring needs a node id in range".into()),
            }
        }
        Ok(())
    }
}
