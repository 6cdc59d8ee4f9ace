//! Shared genesis file: initial validators, allocations and chain parameters.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::block::{Block, BlockHeader};
use crate::consensus::ConsensusConfig;
use crate::gas::GasSchedule;
use crate::hash::Digest;
use crate::keys::Address;
use crate::merkle::merkle_root;
use crate::serde_util::u128_str;
use crate::state::WorldState;
use crate::validators::{ValidatorSet, ValidatorSetError};

#[derive(Debug, Error)]
pub enum GenesisError {
    #[error("invalid validator set: {0}")]
    Validators(#[from] ValidatorSetError),
    #[error("invalid consensus config: all values must be positive")]
    Consensus,
    #[error("invalid gas schedule: all costs must be positive")]
    GasSchedule,
    #[error("allocations overflow the LOCETH supply")]
    Overflow,
    #[error("reading genesis: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing genesis: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Allocation {
    pub address: Address,
    #[serde(with = "u128_str")]
    pub amount: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Genesis {
    pub timestamp: u64,
    pub validators: Vec<Address>,
    #[serde(default)]
    pub allocations: Vec<Allocation>,
    #[serde(default)]
    pub consensus: ConsensusConfig,
    #[serde(default)]
    pub gas_schedule: GasSchedule,
}

impl Genesis {
    pub fn new(validators: Vec<Address>, timestamp: u64) -> Self {
        Self {
            timestamp,
            validators,
            allocations: vec![],
            consensus: ConsensusConfig::default(),
            gas_schedule: GasSchedule::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, GenesisError> {
        let genesis: Genesis = serde_json::from_slice(&std::fs::read(path)?)?;
        genesis.validate()?;
        Ok(genesis)
    }

    pub fn validate(&self) -> Result<(), GenesisError> {
        ValidatorSet::new(self.validators.clone(), 0)?;
        if !self.consensus.is_valid() {
            return Err(GenesisError::Consensus);
        }
        if !self.gas_schedule.is_valid() {
            return Err(GenesisError::GasSchedule);
        }
        self.allocations
            .iter()
            .try_fold(0u128, |acc, a| acc.checked_add(a.amount))
            .ok_or(GenesisError::Overflow)?;
        Ok(())
    }

    pub fn validator_set(&self) -> ValidatorSet {
        ValidatorSet::new(self.validators.clone(), 0).expect("validated genesis")
    }

    pub fn initial_state(&self) -> WorldState {
        let mut state = WorldState::new(self.validator_set(), self.gas_schedule);
        for a in &self.allocations {
            state.allocate(&a.address, a.amount);
        }
        state
    }

    /// The unsigned height-0 block: zero parent, zero proposer, weight 0.
    pub fn block(&self) -> Block {
        Block {
            header: BlockHeader {
                height: 0,
                parent: Digest::ZERO,
                state_root: self.initial_state().state_root(),
                tx_root: merkle_root(&[]),
                proposer: Address::ZERO,
                timestamp: self.timestamp,
                weight: 0,
                signature: None,
            },
            txs: vec![],
        }
    }
}
