use std::collections::BTreeMap;

use poa_core::Digest;
use serde::{Deserialize, Serialize};

use crate::trace::SimTrace;

/// Two honest nodes that finalized different blocks at one height, or one
/// node that replaced a block it had already treated as final.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafetyViolation {
    pub height: u64,
    pub node_a: usize,
    pub digest_a: Digest,
    pub node_b: usize,
    pub digest_b: Digest,
}

/// Fails iff two honest nodes ever finalized conflicting blocks at the same
/// height, or an honest node reverted a final block.
pub fn assert_safety(trace: &SimTrace) -> Result<(), Vec<SafetyViolation>> {
    let mut violations = Vec::new();
    let mut first_seen: BTreeMap<u64, (usize, Digest)> = BTreeMap::new();
    for node in trace.honest_nodes() {
        for (h, d) in node.finalized.iter().enumerate() {
            let h = h as u64;
            match first_seen.get(&h) {
                Some(&(other, od)) if od != *d => violations.push(SafetyViolation {
                    height: h,
                    node_a: other,
                    digest_a: od,
                    node_b: node.id,
                    digest_b: *d,
                }),
                Some(_) => {}
                None => {
                    first_seen.insert(h, (node.id, *d));
                }
            }
        }
        for &h in &node.finality_reversions {
            let d = node.finalized[h as usize];
            violations.push(SafetyViolation {
                height: h,
                node_a: node.id,
                digest_a: d,
                node_b: node.id,
                digest_b: d,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceFailure {
    pub deadline_ms: u64,
    /// Honest node id → (height, digest) at the deadline.
    pub heads: BTreeMap<usize, (u64, Digest)>,
}

/// Passes if at some instant in `[heal_ms, heal_ms + window_slots * slot]`
/// every honest node has the same head.
pub fn assert_convergence(
    trace: &SimTrace,
    heal_ms: u64,
    window_slots: u64,
) -> Result<(), ConvergenceFailure> {
    let slot_ms = trace.config.consensus.slot_seconds * 1000;
    let deadline_ms = heal_ms + window_slots * slot_ms;
    let honest: Vec<_> = trace.honest_nodes().collect();
    let heads_at = |t: u64| -> BTreeMap<usize, (u64, Digest)> {
        honest
            .iter()
            .map(|n| {
                let h = n
                    .head_at(t)
                    .map(|h| (h.height, h.digest))
                    .unwrap_or((0, Digest::ZERO));
                (n.id, h)
            })
            .collect()
    };
    let failure = ConvergenceFailure {
        deadline_ms,
        heads: heads_at(deadline_ms),
    };
    if deadline_ms > trace.duration_s * 1000 {
        return Err(failure);
    }
    let mut instants: Vec<u64> = honest
        .iter()
        .flat_map(|n| n.head_history.iter().map(|h| h.at_ms))
        .filter(|&t| t >= heal_ms && t <= deadline_ms)
        .collect();
    instants.push(heal_ms);
    instants.sort_unstable();
    instants.dedup();
    for t in instants {
        let heads = heads_at(t);
        let mut values = heads.values();
        let first = values.next();
        if values.all(|v| Some(v) == first) {
            return Ok(());
        }
    }
    Err(failure)
}

/// Convergence after the last configured partition; vacuous without one.
pub fn assert_convergence_after_partitions(
    trace: &SimTrace,
    window_slots: u64,
) -> Result<(), ConvergenceFailure> {
    match trace.config.partitions.iter().map(|p| p.end_s).max() {
        None => Ok(()),
        Some(end_s) => assert_convergence(trace, end_s * 1000, window_slots),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConservationFailure {
    pub node: usize,
    pub balance_sum: String,
    pub total_minted: String,
}

/// Σ balances equals total minted in every node's final head state.
pub fn assert_conservation(trace: &SimTrace) -> Result<(), Vec<ConservationFailure>> {
    let failures: Vec<_> = trace
        .nodes
        .iter()
        .filter(|n| n.balance_sum != n.total_minted)
        .map(|n| ConservationFailure {
            node: n.id,
            balance_sum: n.balance_sum.clone(),
            total_minted: n.total_minted.clone(),
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures)
    }
}
