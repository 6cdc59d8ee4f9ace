//! Proof-of-authority block production and acceptance.
//!
//! Validators take turns by height (`members[height mod n]`). The scheduled
//! validator seals at the slot boundary with weight 2; when it is silent any
//! other validator may seal with weight 1 once the out-of-turn delay has
//! passed. A validator may not seal if it sealed any of the previous
//! `n/2` blocks, which caps what a minority can build on its own. The head is
//! the tip of greatest cumulative weight.

mod fork_choice;
mod propose;
mod verify;
mod view;

use serde::{Deserialize, Serialize};

pub use fork_choice::{fork_choice, TipInfo};
pub use propose::{proposal_slot, proposal_slot_on, propose_block, propose_on, Proposal};
pub use verify::{verify_block, BlockError};
pub use view::{Acceptance, ChainView, EquivocationEvidence, HeadChange, StoredBlock};

pub use crate::validators::scheduled_proposer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusConfig {
    pub slot_seconds: u64,
    pub out_of_turn_delay: u64,
    pub block_capacity: usize,
    /// Extra wait per schedule position for out-of-turn sealers, so that the
    /// nearest eligible validator usually seals alone.
    #[serde(default = "default_stagger")]
    pub out_of_turn_stagger: u64,
}

fn default_stagger() -> u64 {
    1
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            slot_seconds: 5,
            out_of_turn_delay: 10,
            block_capacity: 256,
            out_of_turn_stagger: 1,
        }
    }
}

impl ConsensusConfig {
    pub fn is_valid(&self) -> bool {
        self.slot_seconds > 0 && self.out_of_turn_delay > 0 && self.block_capacity > 0
    }
}

/// Number of consecutive blocks within which a validator may seal only once.
pub fn signer_limit(validator_count: usize) -> usize {
    validator_count / 2 + 1
}
