//! World state: accounts, contract storage, LOCETH supply and chain parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{Encode, Encoder};
use crate::contracts::ContractManifest;
use crate::gas::GasSchedule;
use crate::hash::{digest, Digest};
use crate::keys::Address;
use crate::merkle::merkle_root;
use crate::serde_util::u128_str;
use crate::validators::ValidatorSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Validator,
    Operator,
    External,
}

impl Role {
    fn tag(self) -> u8 {
        match self {
            Role::Validator => 1,
            Role::Operator => 2,
            Role::External => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    #[serde(with = "u128_str")]
    pub balance: u128,
    pub nonce: u64,
    pub role: Role,
}

impl Default for Account {
    fn default() -> Self {
        Self {
            balance: 0,
            nonce: 0,
            role: Role::External,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractState {
    pub manifest: ContractManifest,
    pub storage: BTreeMap<Vec<u8>, Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldState {
    pub(crate) accounts: BTreeMap<Address, Account>,
    pub(crate) contracts: BTreeMap<Address, ContractState>,
    pub(crate) total_minted: u128,
    pub(crate) validators: ValidatorSet,
    pub(crate) gas_schedule: GasSchedule,
}

impl WorldState {
    /// Empty state with the built-in contracts deployed.
    pub fn new(validators: ValidatorSet, gas_schedule: GasSchedule) -> Self {
        let contracts = crate::contracts::builtin_manifests()
            .into_iter()
            .map(|m| {
                (
                    m.id,
                    ContractState {
                        manifest: m,
                        storage: BTreeMap::new(),
                    },
                )
            })
            .collect();
        let mut state = Self {
            accounts: BTreeMap::new(),
            contracts,
            total_minted: 0,
            validators: validators.clone(),
            gas_schedule,
        };
        for v in validators.members() {
            state.account_mut(v).role = Role::Validator;
        }
        state
    }

    /// Account at `addr`, or the zero-state External account.
    pub fn account(&self, addr: &Address) -> Account {
        self.accounts.get(addr).cloned().unwrap_or_default()
    }

    pub(crate) fn account_mut(&mut self, addr: &Address) -> &mut Account {
        self.accounts.entry(*addr).or_default()
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&Address, &Account)> {
        self.accounts.iter()
    }

    pub fn total_minted(&self) -> u128 {
        self.total_minted
    }

    pub fn balance_sum(&self) -> u128 {
        self.accounts.values().map(|a| a.balance).sum()
    }

    pub fn validators(&self) -> &ValidatorSet {
        &self.validators
    }

    pub fn gas_schedule(&self) -> &GasSchedule {
        &self.gas_schedule
    }

    pub fn contract(&self, id: &Address) -> Option<&ContractState> {
        self.contracts.get(id)
    }

    pub fn contracts(&self) -> impl Iterator<Item = &ContractState> {
        self.contracts.values()
    }

    /// Credits genesis allocations.
    pub(crate) fn allocate(&mut self, addr: &Address, amount: u128) {
        self.account_mut(addr).balance += amount;
        self.total_minted += amount;
    }

    /// Merkle root over `digest(key, value)` leaves sorted by key.
    pub fn state_root(&self) -> Digest {
        let mut leaves: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
        for (addr, acct) in &self.accounts {
            let mut v = Encoder::new();
            v.put_u128(acct.balance);
            v.put_u64(acct.nonce);
            v.put_u8(acct.role.tag());
            leaves.push((prefixed(b'a', &addr.0), v.into_bytes()));
        }
        for (id, contract) in &self.contracts {
            leaves.push((prefixed(b'm', &id.0), contract.manifest.digest().0.to_vec()));
            for (k, v) in &contract.storage {
                let mut key = prefixed(b's', &id.0);
                key.extend_from_slice(k);
                leaves.push((key, v.clone()));
            }
        }
        leaves.push((b"g".to_vec(), self.gas_schedule.to_bytes()));
        leaves.push((b"t".to_vec(), self.total_minted.to_be_bytes().to_vec()));
        leaves.push((b"v".to_vec(), self.validators.to_bytes()));
        leaves.sort_by(|a, b| a.0.cmp(&b.0));
        let digests: Vec<Digest> = leaves.iter().map(|(k, v)| leaf_digest(k, v)).collect();
        merkle_root(&digests)
    }
}

fn prefixed(tag: u8, bytes: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + bytes.len());
    out.push(tag);
    out.extend_from_slice(bytes);
    out
}

fn leaf_digest(key: &[u8], value: &[u8]) -> Digest {
    let mut enc = Encoder::new();
    enc.put_bytes(key);
    enc.put_bytes(value);
    digest(&enc.into_bytes())
}
