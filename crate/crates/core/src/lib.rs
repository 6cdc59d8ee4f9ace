//! Permissioned proof-of-authority ledger.
//!
//! Accounts hold a locally minted currency that pays for gas; holding it is
//! what lets an address write to the chain. Validators take turns sealing
//! blocks, built-in contracts provide document notarization and an event log,
//! and the digest of a final block is periodically committed to an external
//! witness so that later rewrites can be detected.

pub mod anchoring;
pub mod block;
pub mod codec;
pub mod consensus;
pub mod contracts;
pub mod devnet;
pub mod docstore;
pub mod execution;
pub mod export;
pub mod gas;
pub mod genesis;
pub mod gossip;
pub mod hash;
pub mod keys;
pub mod merkle;
pub mod node;
pub mod serde_util;
pub mod state;
pub mod tx;
pub mod validation;
pub mod validators;

pub use block::{Block, BlockHeader};
pub use genesis::Genesis;
pub use hash::{digest, Digest};
pub use keys::{Address, KeyPair, Signature};
pub use state::{Account, Role, WorldState};
pub use tx::{ContractCall, GovernanceAction, Transaction, TxKind};
