use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Decode, DecodeError, Decoder, Encode, Encoder};
use crate::keys::Address;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidatorSetError {
    #[error("validator set must not be empty")]
    Empty,
    #[error("duplicate validator {0}")]
    Duplicate(Address),
}

/// The authorities allowed to seal blocks, in canonical schedule order
/// (ascending address).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidatorSet {
    members: Vec<Address>,
    effective_from: u64,
}

impl ValidatorSet {
    pub fn new(mut members: Vec<Address>, effective_from: u64) -> Result<Self, ValidatorSetError> {
        if members.is_empty() {
            return Err(ValidatorSetError::Empty);
        }
        members.sort();
        if let Some(w) = members.windows(2).find(|w| w[0] == w[1]) {
            return Err(ValidatorSetError::Duplicate(w[0]));
        }
        Ok(Self {
            members,
            effective_from,
        })
    }

    pub fn members(&self) -> &[Address] {
        &self.members
    }

    pub fn effective_from(&self) -> u64 {
        self.effective_from
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, addr: &Address) -> bool {
        self.members.binary_search(addr).is_ok()
    }

    pub fn index_of(&self, addr: &Address) -> Option<usize> {
        self.members.binary_search(addr).ok()
    }

    /// Strict majority of the current set.
    pub fn majority(&self) -> usize {
        self.members.len() / 2 + 1
    }

    pub fn with_added(
        &self,
        addr: Address,
        effective_from: u64,
    ) -> Result<Self, ValidatorSetError> {
        let mut members = self.members.clone();
        members.push(addr);
        Self::new(members, effective_from)
    }

    pub fn with_removed(
        &self,
        addr: &Address,
        effective_from: u64,
    ) -> Result<Self, ValidatorSetError> {
        let members = self.members.iter().copied().filter(|m| m != addr).collect();
        Self::new(members, effective_from)
    }
}

/// Round-robin proposer for `height`: `members[height mod size]`.
pub fn scheduled_proposer(height: u64, set: &ValidatorSet) -> Address {
    let n = set.members.len() as u64;
    set.members[(height % n) as usize]
}

impl Encode for ValidatorSet {
    fn encode(&self, enc: &mut Encoder) {
        enc.put_u32(self.members.len() as u32);
        for m in &self.members {
            enc.put_fixed(&m.0);
        }
        enc.put_u64(self.effective_from);
    }
}

impl Decode for ValidatorSet {
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let n = dec.get_u32("validator count")? as usize;
        if n.saturating_mul(20) > dec.remaining() {
            return Err(DecodeError::UnexpectedEnd("validators"));
        }
        let members = (0..n)
            .map(|_| dec.get_array("validator").map(Address))
            .collect::<Result<Vec<_>, _>>()?;
        let effective_from = dec.get_u64("effective from")?;
        Self::new(members, effective_from).map_err(|_| DecodeError::Invalid("validator set"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: u8) -> ValidatorSet {
        ValidatorSet::new((0..n).map(|i| Address::well_known(i * 3 + 1)).collect(), 0).unwrap()
    }

    #[test]
    fn schedule_examples() {
        let s = set(7);
        assert_eq!(scheduled_proposer(0, &s), s.members()[0]);
        assert_eq!(scheduled_proposer(13, &s), s.members()[6]);
    }

    #[test]
    fn seventy_heights_give_each_member_ten_turns() {
        let s = set(7);
        let mut counts = std::collections::HashMap::new();
        for h in 0..70 {
            *counts.entry(scheduled_proposer(h, &s)).or_insert(0) += 1;
        }
        assert_eq!(counts.len(), 7);
        assert!(counts.values().all(|&c| c == 10));
    }

    #[test]
    fn members_sorted_and_deduplicated() {
        let a = Address::well_known(9);
        let b = Address::well_known(2);
        let s = ValidatorSet::new(vec![a, b], 0).unwrap();
        assert_eq!(s.members(), &[b, a]);
        assert_eq!(
            ValidatorSet::new(vec![a, a], 0),
            Err(ValidatorSetError::Duplicate(a))
        );
        assert_eq!(ValidatorSet::new(vec![], 0), Err(ValidatorSetError::Empty));
    }

    #[test]
    fn majority_is_strict() {
        assert_eq!(set(7).majority(), 4);
        assert_eq!(set(8).majority(), 5);
        assert_eq!(set(1).majority(), 1);
    }

    #[test]
    fn encoding_round_trips() {
        let s = set(5);
        assert_eq!(ValidatorSet::from_bytes(&s.to_bytes()).unwrap(), s);
    }
}
