use thiserror::Error;

use super::{signer_limit, ConsensusConfig};
use crate::block::{Block, BlockHeader, WEIGHT_IN_TURN, WEIGHT_OUT_OF_TURN};
use crate::execution::{apply_transactions, BlockContext, Receipt, TxError};
use crate::hash::Digest;
use crate::keys::Address;
use crate::state::WorldState;
use crate::validators::scheduled_proposer;

/// Why a block cannot extend its parent.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BlockError {
    #[error("parent link mismatch: expected parent {expected} at height {expected_height}")]
    ParentMismatch {
        expected: Digest,
        expected_height: u64,
    },
    #[error("{count} transactions exceed block capacity {capacity}")]
    OverCapacity { count: usize, capacity: usize },
    #[error("tx_root does not match the listed transactions")]
    TxRootMismatch,
    #[error("timestamp {got} earlier than {min}")]
    NonMonotonicTimestamp { got: u64, min: u64 },
    #[error("proposer signature missing or invalid")]
    BadSignature,
    #[error("{0} is not an authorized validator")]
    UnauthorizedProposer(Address),
    #[error("weight {got} but expected {expected}")]
    WrongWeight { got: u8, expected: u8 },
    #[error("out-of-turn block at {got} before {min}")]
    OutOfTurnTooEarly { got: u64, min: u64 },
    #[error("{0} sealed one of the recent blocks")]
    RecentlySigned(Address),
    #[error("transaction {index} invalid: {error}")]
    InvalidTransaction { index: usize, error: TxError },
    #[error("state root mismatch: header {header}, computed {computed}")]
    StateRootMismatch { header: Digest, computed: Digest },
    #[error("genesis block does not match the genesis file")]
    BadGenesis,
}

impl BlockError {
    /// Machine-readable reason code.
    pub fn reason(&self) -> &'static str {
        match self {
            BlockError::ParentMismatch { .. } => "parent-link-mismatch",
            BlockError::OverCapacity { .. } => "over-capacity",
            BlockError::TxRootMismatch => "tx-root-mismatch",
            BlockError::NonMonotonicTimestamp { .. } => "non-monotonic-timestamp",
            BlockError::BadSignature => "bad-signature",
            BlockError::UnauthorizedProposer(_) => "unauthorized-proposer",
            BlockError::WrongWeight { .. } => "wrong-weight",
            BlockError::OutOfTurnTooEarly { .. } => "out-of-turn-too-early",
            BlockError::RecentlySigned(_) => "recently-signed",
            BlockError::InvalidTransaction { .. } => "invalid-transaction",
            BlockError::StateRootMismatch { .. } => "state-root-mismatch",
            BlockError::BadGenesis => "bad-genesis",
        }
    }
}

/// Full check of `block` as a child of `parent`: structure, signature,
/// proposer authorization and turn, then re-execution against `parent_state`.
///
/// `recent_signers` lists proposers of the most recent ancestors, newest
/// first, starting with `parent` (genesis excluded).
pub fn verify_block(
    parent: &BlockHeader,
    parent_state: &WorldState,
    recent_signers: &[Address],
    block: &Block,
    config: &ConsensusConfig,
) -> Result<(WorldState, Vec<Receipt>), BlockError> {
    let header = &block.header;
    let parent_digest = parent.digest();
    if header.parent != parent_digest || header.height != parent.height + 1 {
        return Err(BlockError::ParentMismatch {
            expected: parent_digest,
            expected_height: parent.height + 1,
        });
    }
    if block.txs.len() > config.block_capacity {
        return Err(BlockError::OverCapacity {
            count: block.txs.len(),
            capacity: config.block_capacity,
        });
    }
    if block.compute_tx_root() != header.tx_root {
        return Err(BlockError::TxRootMismatch);
    }
    let min_ts = parent.timestamp + config.slot_seconds;
    if header.timestamp < min_ts {
        return Err(BlockError::NonMonotonicTimestamp {
            got: header.timestamp,
            min: min_ts,
        });
    }
    if !header.signature_valid() {
        return Err(BlockError::BadSignature);
    }
    let set = parent_state.validators();
    if !set.contains(&header.proposer) {
        return Err(BlockError::UnauthorizedProposer(header.proposer));
    }
    let in_turn = scheduled_proposer(header.height, set) == header.proposer;
    let expected = if in_turn {
        WEIGHT_IN_TURN
    } else {
        WEIGHT_OUT_OF_TURN
    };
    if header.weight != expected {
        return Err(BlockError::WrongWeight {
            got: header.weight,
            expected,
        });
    }
    if !in_turn {
        let min = min_ts + config.out_of_turn_delay;
        if header.timestamp < min {
            return Err(BlockError::OutOfTurnTooEarly {
                got: header.timestamp,
                min,
            });
        }
    }
    let window = signer_limit(set.len()) - 1;
    if recent_signers
        .iter()
        .take(window)
        .any(|s| *s == header.proposer)
    {
        return Err(BlockError::RecentlySigned(header.proposer));
    }

    let mut state = parent_state.clone();
    let ctx = BlockContext::new(
        parent_state,
        header.height,
        header.timestamp,
        header.proposer,
    );
    let receipts = apply_transactions(&mut state, &block.txs, &ctx)
        .map_err(|(index, error)| BlockError::InvalidTransaction { index, error })?;
    let computed = state.state_root();
    if computed != header.state_root {
        return Err(BlockError::StateRootMismatch {
            header: header.state_root,
            computed,
        });
    }
    Ok((state, receipts))
}
