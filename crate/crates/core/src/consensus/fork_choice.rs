use std::cmp::{Ordering, Reverse};

use serde::{Deserialize, Serialize};

use crate::hash::Digest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TipInfo {
    pub digest: Digest,
    pub height: u64,
    pub cumulative_weight: u64,
}

impl TipInfo {
    fn key(&self) -> (u64, u64, Reverse<Digest>) {
        (self.cumulative_weight, self.height, Reverse(self.digest))
    }

    /// Heaviest first, then higher, then the lower digest.
    pub fn preference(&self, other: &TipInfo) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Picks the preferred tip: maximum cumulative weight, ties by greater
/// height, then lower digest.
pub fn fork_choice<'a>(tips: impl IntoIterator<Item = &'a TipInfo>) -> Option<Digest> {
    tips.into_iter()
        .max_by(|a, b| a.preference(b))
        .map(|t| t.digest)
}
