//! Whole-chain verification from genesis.

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::consensus::{signer_limit, verify_block, BlockError};
use crate::genesis::Genesis;
use crate::hash::Digest;
use crate::keys::Address;
use crate::state::WorldState;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub height: u64,
    /// Machine-readable reason code, e.g. `tx-root-mismatch`.
    pub reason: String,
    pub detail: String,
}

impl Violation {
    fn new(height: u64, err: &BlockError) -> Self {
        Self {
            height,
            reason: err.reason().to_string(),
            detail: err.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Number of blocks that passed, genesis included.
    pub valid_blocks: u64,
    pub head: Option<Digest>,
    pub violation: Option<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violation.is_none()
    }
}

/// Replays `blocks` from genesis: parent links, tx roots, proposer
/// signatures and authorization, timestamps and post-execution state roots.
/// The validator set at each height is the one recorded in the parent state,
/// so governance changes are followed exactly as they were applied.
pub fn validate_chain(blocks: &[Block], genesis: &Genesis) -> ValidationReport {
    replay_chain(blocks, genesis).0
}

/// Like [`validate_chain`], also returning the state after the last valid block.
pub fn replay_chain(blocks: &[Block], genesis: &Genesis) -> (ValidationReport, WorldState) {
    let mut state = genesis.initial_state();
    let Some(first) = blocks.first() else {
        let report = ValidationReport {
            valid_blocks: 0,
            head: None,
            violation: Some(Violation {
                height: 0,
                reason: "empty-chain".into(),
                detail: "no blocks".into(),
            }),
        };
        return (report, state);
    };
    if *first != genesis.block() {
        let report = ValidationReport {
            valid_blocks: 0,
            head: None,
            violation: Some(Violation::new(first.height(), &BlockError::BadGenesis)),
        };
        return (report, state);
    }
    // Proposers of the chain so far, newest last.
    let mut signers: Vec<Address> = Vec::new();
    for (i, pair) in blocks.windows(2).enumerate() {
        let (parent, block) = (&pair[0], &pair[1]);
        let window = signer_limit(state.validators().len()) - 1;
        let recent: Vec<Address> = signers.iter().rev().take(window).copied().collect();
        match verify_block(&parent.header, &state, &recent, block, &genesis.consensus) {
            Ok((next, _)) => {
                state = next;
                signers.push(block.header.proposer);
            }
            Err(e) => {
                let report = ValidationReport {
                    valid_blocks: (i + 1) as u64,
                    head: Some(parent.digest()),
                    violation: Some(Violation::new(parent.height() + 1, &e)),
                };
                return (report, state);
            }
        }
    }
    let report = ValidationReport {
        valid_blocks: blocks.len() as u64,
        head: blocks.last().map(Block::digest),
        violation: None,
    };
    (report, state)
}
