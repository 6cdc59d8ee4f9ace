//! Built-in contracts. Each is a fixed deterministic state machine with an
//! inspectable manifest in place of user bytecode.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::execution::{BlockContext, Event};
use crate::hash::{digest, Digest};
use crate::keys::Address;
use crate::state::ContractState;
use crate::tx::{ContractCall, GovernanceAction};

pub const DOCUMENT_REGISTRY: Address = Address::well_known(1);
pub const EVENT_LOG: Address = Address::well_known(2);
pub const VALIDATOR_GOVERNANCE: Address = Address::well_known(3);

pub const MAX_LINK_BYTES: usize = 128;
pub const MAX_TOPIC_BYTES: usize = 64;
pub const MAX_EVENT_DATA_BYTES: usize = 1024;
pub const LINK_SCHEME: &str = "store://";

const COUNT_KEY: &[u8] = b"count";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContractKind {
    DocumentRegistry,
    EventLog,
    ValidatorGovernance,
}

impl ContractKind {
    fn tag(self) -> u8 {
        match self {
            ContractKind::DocumentRegistry => 1,
            ContractKind::EventLog => 2,
            ContractKind::ValidatorGovernance => 3,
        }
    }
}

/// Human-readable description of a built-in contract, fixed at deployment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractManifest {
    pub id: Address,
    pub kind: ContractKind,
    pub name: String,
    pub rules: String,
    pub parameters: BTreeMap<String, String>,
    pub parameter_digest: Digest,
}

impl ContractManifest {
    fn new(
        id: Address,
        kind: ContractKind,
        name: &str,
        rules: &str,
        params: &[(&str, String)],
    ) -> Self {
        let parameters: BTreeMap<String, String> = params
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        let mut enc = Encoder::new();
        for (k, v) in &parameters {
            enc.put_str(k);
            enc.put_str(v);
        }
        Self {
            id,
            kind,
            name: name.to_string(),
            rules: rules.to_string(),
            parameters,
            parameter_digest: digest(&enc.into_bytes()),
        }
    }

    /// Digest recorded in the state root; any manifest change is visible there.
    pub fn digest(&self) -> Digest {
        let mut enc = Encoder::new();
        enc.put_fixed(&self.id.0);
        enc.put_u8(self.kind.tag());
        enc.put_str(&self.name);
        enc.put_str(&self.rules);
        enc.put_fixed(&self.parameter_digest.0);
        digest(&enc.into_bytes())
    }
}

pub fn builtin_manifests() -> Vec<ContractManifest> {
    vec![
        ContractManifest::new(
            DOCUMENT_REGISTRY,
            ContractKind::DocumentRegistry,
            "DocumentRegistry",
            "Maps a document digest to (link, registrant, block height, block timestamp). \
             Only operators and validators may register. A digest can be registered once; \
             a second registration reverts. Links must use the store:// scheme and be at \
             most max_link_bytes long. Entries are never modified or deleted.",
            &[
                ("link_scheme", LINK_SCHEME.to_string()),
                ("max_link_bytes", MAX_LINK_BYTES.to_string()),
            ],
        ),
        ContractManifest::new(
            EVENT_LOG,
            ContractKind::EventLog,
            "EventLog",
            "Append-only log of (sender, topic, data) records keyed by sequence number. \
             Topics are at most max_topic_bytes and data at most max_data_bytes.",
            &[
                ("max_data_bytes", MAX_EVENT_DATA_BYTES.to_string()),
                ("max_topic_bytes", MAX_TOPIC_BYTES.to_string()),
            ],
        ),
        ContractManifest::new(
            VALIDATOR_GOVERNANCE,
            ContractKind::ValidatorGovernance,
            "ValidatorGovernance",
            "Records validator additions, removals and gas schedule updates. Changes are \
             submitted as Governance transactions by a validator and require approval \
             signatures from a strict majority of the current validator set. Changes take \
             effect from the next block height. Direct contract calls revert.",
            &[("threshold", "strict-majority".to_string())],
        ),
    ]
}

/// On-chain entry of the document registry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub link: String,
    pub registrant: Address,
    pub height: u64,
    pub timestamp: u64,
}

impl Encode for DocumentRecord {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_str(&self.link);
        enc.put_fixed(&self.registrant.0);
        enc.put_u64(self.height);
        enc.put_u64(self.timestamp);
    }
}

impl Decode for DocumentRecord {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            link: dec.get_string("link")?,
            registrant: Address(dec.get_array("registrant")?),
            height: dec.get_u64("height")?,
            timestamp: dec.get_u64("timestamp")?,
        })
    }
}

/// Storage writes and events produced by a successful call.
#[derive(Debug, Default)]
pub(crate) struct CallOutcome {
    pub writes: Vec<(Vec<u8>, Vec<u8>)>,
    pub events: Vec<Event>,
}

fn next_seq(contract: &ContractState) -> u64 {
    contract
        .storage
        .get(COUNT_KEY)
        .and_then(|v| v.as_slice().try_into().ok())
        .map(u64::from_be_bytes)
        .unwrap_or(0)
}

fn seq_key(prefix: &[u8], seq: u64) -> Vec<u8> {
    let mut key = prefix.to_vec();
    key.extend_from_slice(&seq.to_be_bytes());
    key
}

/// Runs `call` against `contract` without mutating it. `Err` is a revert reason.
pub(crate) fn execute_call(
    contract: &ContractState,
    call: &ContractCall,
    sender: &Address,
    ctx: &BlockContext,
) -> Result<CallOutcome, String> {
    match (contract.manifest.kind, call) {
        (ContractKind::DocumentRegistry, ContractCall::RegisterDocument { digest, link }) => {
            if !link.starts_with(LINK_SCHEME) {
                return Err(format!("link must use the {LINK_SCHEME} scheme"));
            }
            if link.len() > MAX_LINK_BYTES {
                return Err(format!("link longer than {MAX_LINK_BYTES} bytes"));
            }
            if contract.storage.contains_key(&digest.0[..]) {
                return Err(format!("document {digest} already registered"));
            }
            let record = DocumentRecord {
                link: link.clone(),
                registrant: *sender,
                height: ctx.height,
                timestamp: ctx.timestamp,
            };
            Ok(CallOutcome {
                writes: vec![(digest.0.to_vec(), record.to_bytes())],
                events: vec![Event {
                    contract: contract.manifest.id,
                    topic: "DocumentRegistered".into(),
                    data: digest.0.to_vec(),
                }],
            })
        }
        (ContractKind::EventLog, ContractCall::LogEvent { topic, data }) => {
            if topic.len() > MAX_TOPIC_BYTES {
                return Err(format!("topic longer than {MAX_TOPIC_BYTES} bytes"));
            }
            if data.len() > MAX_EVENT_DATA_BYTES {
                return Err(format!(
                    "event data longer than {MAX_EVENT_DATA_BYTES} bytes"
                ));
            }
            let seq = next_seq(contract);
            let mut value = Encoder::new();
            value.put_fixed(&sender.0);
            value.put_str(topic);
            value.put_bytes(data);
            Ok(CallOutcome {
                writes: vec![
                    (seq_key(b"e", seq), value.into_bytes()),
                    (COUNT_KEY.to_vec(), (seq + 1).to_be_bytes().to_vec()),
                ],
                events: vec![Event {
                    contract: contract.manifest.id,
                    topic: topic.clone(),
                    data: data.clone(),
                }],
            })
        }
        (ContractKind::ValidatorGovernance, _) => {
            Err("governance changes must be submitted as Governance transactions".into())
        }
        (kind, call) => Err(format!("{kind:?} does not accept {}", call_name(call))),
    }
}

fn call_name(call: &ContractCall) -> &'static str {
    match call {
        ContractCall::RegisterDocument { .. } => "RegisterDocument",
        ContractCall::LogEvent { .. } => "LogEvent",
    }
}

/// Storage writes recording an applied governance change.
pub(crate) fn governance_record(
    contract: &ContractState,
    action: &GovernanceAction,
    height: u64,
) -> CallOutcome {
    let seq = next_seq(contract);
    let mut value = Encoder::new();
    action.encode(&mut value);
    value.put_u64(height + 1);
    CallOutcome {
        writes: vec![
            (seq_key(b"c", seq), value.into_bytes()),
            (COUNT_KEY.to_vec(), (seq + 1).to_be_bytes().to_vec()),
        ],
        events: vec![Event {
            contract: contract.manifest.id,
            topic: "GovernanceChange".into(),
            data: action.to_bytes(),
        }],
    }
}
