use super::signer_limit;
use super::view::ChainView;
use crate::block::{Block, BlockHeader, WEIGHT_IN_TURN, WEIGHT_OUT_OF_TURN};
use crate::execution::{apply_transaction, BlockContext, TxError};
use crate::hash::Digest;
use crate::keys::{Address, KeyPair};
use crate::merkle::merkle_root;
use crate::tx::Transaction;
use crate::validators::scheduled_proposer;

/// A sealed block plus what happened to the pending transactions.
#[derive(Clone, Debug)]
pub struct Proposal {
    pub block: Block,
    /// Transactions that can never be included on this parent.
    pub dropped: Vec<(Digest, TxError)>,
    /// Future-nonce transactions kept for a later block.
    pub deferred: Vec<Digest>,
}

/// Earliest time `who` may seal a child of the current head, and the weight it
/// would carry. `None` if `who` is not a validator or sealed too recently.
pub fn proposal_slot(view: &ChainView, who: &Address) -> Option<(u64, u8)> {
    proposal_slot_on(view, &view.head(), who)
}

/// [`proposal_slot`] for an arbitrary known parent.
pub fn proposal_slot_on(view: &ChainView, parent: &Digest, who: &Address) -> Option<(u64, u8)> {
    let parent = view.get(parent)?;
    let set = parent.state.validators();
    set.index_of(who)?;
    if view.recently_signed(&parent.digest, who) {
        return None;
    }
    let cfg = view.config();
    let height = parent.height() + 1;
    let due = parent.block.header.timestamp + cfg.slot_seconds;
    let scheduled = scheduled_proposer(height, set);
    if scheduled == *who {
        return Some((due, WEIGHT_IN_TURN));
    }
    // Stand-ins queue up behind the scheduled proposer in reverse schedule
    // order, skipping recent signers. The successor goes last: if it sealed
    // now it would be barred from its own turn next, and the rotation would
    // stay shifted for good.
    let n = set.len();
    let sched_index = set
        .index_of(&scheduled)
        .expect("scheduled proposer is a member");
    let window = signer_limit(n) - 1;
    let recent = view.recent_signers(&parent.digest, window);
    let rank = (1..n)
        .map(|k| set.members()[(sched_index + n - k) % n])
        .filter(|a| !recent.contains(a))
        .position(|a| a == *who)
        .expect("eligible stand-in is ranked");
    let wait = cfg.out_of_turn_delay + rank as u64 * cfg.out_of_turn_stagger;
    Some((due + wait, WEIGHT_OUT_OF_TURN))
}

/// Seals a block on the current head if `key` may do so at `now`.
///
/// Pending transactions are applied in order against a snapshot of the head
/// state; failures are dropped (future nonces are deferred) and never block
/// the rest.
pub fn propose_block(
    view: &ChainView,
    key: &KeyPair,
    pending: &[Transaction],
    now: u64,
) -> Option<Proposal> {
    propose_on(view, &view.head(), key, pending, now)
}

/// [`propose_block`] on an arbitrary known parent.
pub fn propose_on(
    view: &ChainView,
    parent: &Digest,
    key: &KeyPair,
    pending: &[Transaction],
    now: u64,
) -> Option<Proposal> {
    let (earliest, weight) = proposal_slot_on(view, parent, &key.address())?;
    if now < earliest {
        return None;
    }
    let parent = view.get(parent)?;
    let height = parent.height() + 1;
    let mut state = (*parent.state).clone();
    let ctx = BlockContext::new(&parent.state, height, now, key.address());

    let mut txs = Vec::new();
    let mut dropped = Vec::new();
    let mut deferred = Vec::new();
    for tx in pending {
        if txs.len() == view.config().block_capacity {
            break;
        }
        match apply_transaction(&mut state, tx, &ctx) {
            Ok(_) => txs.push(tx.clone()),
            Err(e) if e.is_future_nonce() => deferred.push(tx.digest()),
            Err(e) => dropped.push((tx.digest(), e)),
        }
    }
    let tx_digests: Vec<Digest> = txs.iter().map(Transaction::digest).collect();
    let mut header = BlockHeader {
        height,
        parent: parent.digest,
        state_root: state.state_root(),
        tx_root: merkle_root(&tx_digests),
        proposer: key.address(),
        timestamp: now,
        weight,
        signature: None,
    };
    header.sign(key);
    Some(Proposal {
        block: Block { header, txs },
        dropped,
        deferred,
    })
}
