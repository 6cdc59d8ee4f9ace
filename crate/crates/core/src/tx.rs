//! Signed, nonce-ordered state-change requests.

use serde::{Deserialize, Serialize};

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::gas::GasSchedule;
use crate::hash::{digest, Digest};
use crate::keys::{Address, KeyPair, Signature};
use crate::serde_util::{hex_bytes, u128_str};

/// Call into one of the built-in contracts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ContractCall {
    /// Record `(link, sender, height, timestamp)` for a document digest.
    RegisterDocument { digest: Digest, link: String },
    /// Append an opaque event record.
    LogEvent {
        topic: String,
        #[serde(with = "hex_bytes")]
        data: Vec<u8>,
    },
}

impl Encode for ContractCall {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            ContractCall::RegisterDocument { digest, link } => {
                enc.put_u8(1);
                enc.put_fixed(&digest.0);
                enc.put_str(link);
            }
            ContractCall::LogEvent { topic, data } => {
                enc.put_u8(2);
                enc.put_str(topic);
                enc.put_bytes(data);
            }
        }
    }
}

impl Decode for ContractCall {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8("contract call")? {
            1 => Ok(ContractCall::RegisterDocument {
                digest: Digest(dec.get_array("document digest")?),
                link: dec.get_string("document link")?,
            }),
            2 => Ok(ContractCall::LogEvent {
                topic: dec.get_string("event topic")?,
                data: dec.get_bytes("event data")?,
            }),
            tag => Err(DecodeError::InvalidTag {
                what: "contract call",
                tag,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "value", rename_all = "snake_case")]
pub enum GovernanceAction {
    AddValidator(Address),
    RemoveValidator(Address),
    UpdateGasSchedule(GasSchedule),
}

impl GovernanceAction {
    /// Message each approving validator signs for a proposal submitted by
    /// `proposer` at `nonce`. Binding the proposer nonce prevents replay.
    pub fn approval_digest(&self, proposer: &Address, nonce: u64) -> Digest {
        let mut enc = Encoder::new();
        enc.put_fixed(b"poa/governance-approval");
        self.encode(&mut enc);
        enc.put_fixed(&proposer.0);
        enc.put_u64(nonce);
        digest(&enc.into_bytes())
    }
}

impl Encode for GovernanceAction {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            GovernanceAction::AddValidator(a) => {
                enc.put_u8(1);
                enc.put_fixed(&a.0);
            }
            GovernanceAction::RemoveValidator(a) => {
                enc.put_u8(2);
                enc.put_fixed(&a.0);
            }
            GovernanceAction::UpdateGasSchedule(s) => {
                enc.put_u8(3);
                s.encode(enc);
            }
        }
    }
}

impl Decode for GovernanceAction {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8("governance action")? {
            1 => Ok(GovernanceAction::AddValidator(Address(
                dec.get_array("address")?,
            ))),
            2 => Ok(GovernanceAction::RemoveValidator(Address(
                dec.get_array("address")?,
            ))),
            3 => Ok(GovernanceAction::UpdateGasSchedule(dec.get()?)),
            tag => Err(DecodeError::InvalidTag {
                what: "governance action",
                tag,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TxKind {
    Transfer {
        to: Address,
        #[serde(with = "u128_str")]
        amount: u128,
    },
    Mint {
        beneficiary: Address,
        #[serde(with = "u128_str")]
        amount: u128,
    },
    Endow {
        operator: Address,
        #[serde(with = "u128_str")]
        amount: u128,
    },
    ContractCall {
        contract: Address,
        call: ContractCall,
    },
    Governance {
        action: GovernanceAction,
        approvals: Vec<Signature>,
    },
}

impl TxKind {
    pub fn name(&self) -> &'static str {
        match self {
            TxKind::Transfer { .. } => "Transfer",
            TxKind::Mint { .. } => "Mint",
            TxKind::Endow { .. } => "Endow",
            TxKind::ContractCall { .. } => "ContractCall",
            TxKind::Governance { .. } => "Governance",
        }
    }

    /// Variable-length payload bytes metered by `per_payload_byte`.
    pub fn payload_len(&self) -> usize {
        match self {
            TxKind::ContractCall { call, .. } => call.to_bytes().len(),
            _ => 0,
        }
    }

    /// Address credited by this transaction, if any.
    pub fn recipient(&self) -> Option<Address> {
        match self {
            TxKind::Transfer { to, .. } => Some(*to),
            TxKind::Mint { beneficiary, .. } => Some(*beneficiary),
            TxKind::Endow { operator, .. } => Some(*operator),
            TxKind::ContractCall { .. } | TxKind::Governance { .. } => None,
        }
    }
}

impl Encode for TxKind {
    fn encode(&self, enc: &mut Encoder) {
        match self {
            TxKind::Transfer { to, amount } => {
                enc.put_u8(1);
                enc.put_fixed(&to.0);
                enc.put_u128(*amount);
            }
            TxKind::Mint {
                beneficiary,
                amount,
            } => {
                enc.put_u8(2);
                enc.put_fixed(&beneficiary.0);
                enc.put_u128(*amount);
            }
            TxKind::Endow { operator, amount } => {
                enc.put_u8(3);
                enc.put_fixed(&operator.0);
                enc.put_u128(*amount);
            }
            TxKind::ContractCall { contract, call } => {
                enc.put_u8(4);
                enc.put_fixed(&contract.0);
                call.encode(enc);
            }
            TxKind::Governance { action, approvals } => {
                enc.put_u8(5);
                action.encode(enc);
                enc.put_seq(approvals);
            }
        }
    }
}

impl Decode for TxKind {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        match dec.get_u8("tx kind")? {
            1 => Ok(TxKind::Transfer {
                to: Address(dec.get_array("to")?),
                amount: dec.get_u128("amount")?,
            }),
            2 => Ok(TxKind::Mint {
                beneficiary: Address(dec.get_array("beneficiary")?),
                amount: dec.get_u128("amount")?,
            }),
            3 => Ok(TxKind::Endow {
                operator: Address(dec.get_array("operator")?),
                amount: dec.get_u128("amount")?,
            }),
            4 => Ok(TxKind::ContractCall {
                contract: Address(dec.get_array("contract")?),
                call: dec.get()?,
            }),
            5 => Ok(TxKind::Governance {
                action: dec.get()?,
                approvals: dec.get_seq("approvals")?,
            }),
            tag => Err(DecodeError::InvalidTag {
                what: "tx kind",
                tag,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub sender: Address,
    pub nonce: u64,
    pub gas_limit: u64,
    #[serde(flatten)]
    pub kind: TxKind,
    pub signature: Signature,
}

impl Transaction {
    pub fn signed(key: &KeyPair, nonce: u64, gas_limit: u64, kind: TxKind) -> Self {
        let sender = key.address();
        let digest = unsigned_digest(&sender, nonce, gas_limit, &kind);
        Transaction {
            sender,
            nonce,
            gas_limit,
            kind,
            signature: key.sign(&digest),
        }
    }

    /// Digest of every field except the signature.
    pub fn digest(&self) -> Digest {
        unsigned_digest(&self.sender, self.nonce, self.gas_limit, &self.kind)
    }

    pub fn verify_signature(&self) -> bool {
        self.signature.verify_by(&self.sender, &self.digest())
    }
}

fn encode_unsigned(enc: &mut Encoder, sender: &Address, nonce: u64, gas_limit: u64, kind: &TxKind) {
    enc.put_fixed(&sender.0);
    enc.put_u64(nonce);
    enc.put_u64(gas_limit);
    kind.encode(enc);
}

fn unsigned_digest(sender: &Address, nonce: u64, gas_limit: u64, kind: &TxKind) -> Digest {
    let mut enc = Encoder::new();
    encode_unsigned(&mut enc, sender, nonce, gas_limit, kind);
    digest(&enc.into_bytes())
}

impl Encode for Transaction {
    fn encode(&self, enc: &mut Encoder) {
        encode_unsigned(enc, &self.sender, self.nonce, self.gas_limit, &self.kind);
        self.signature.encode(enc);
    }
}

impl Decode for Transaction {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(Transaction {
            sender: Address(dec.get_array("sender")?),
            nonce: dec.get_u64("nonce")?,
            gas_limit: dec.get_u64("gas limit")?,
            kind: dec.get()?,
            signature: dec.get()?,
        })
    }
}
