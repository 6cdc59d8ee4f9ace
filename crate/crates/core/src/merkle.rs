//! Binary Merkle root over digests.

use crate::hash::{digest, digest_concat, Digest};

/// Root of a binary Merkle tree whose leaves are `leaves`.
///
/// An odd node at any level is paired with itself, and the empty list maps to
/// the digest of the empty byte string. A single leaf `d` therefore yields
/// `digest(d || d)`.
pub fn merkle_root(leaves: &[Digest]) -> Digest {
    if leaves.is_empty() {
        return digest(&[]);
    }
    let mut level: Vec<Digest> = leaves.to_vec();
    loop {
        level = level
            .chunks(2)
            .map(|pair| {
                let right = pair.get(1).unwrap_or(&pair[0]);
                digest_concat(&[&pair[0].0, &right.0])
            })
            .collect();
        if level.len() == 1 {
            return level[0];
        }
    }
}
