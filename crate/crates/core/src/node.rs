//! Validator node logic with no I/O of its own.
//!
//! The node consumes [`Input`]s stamped with the current time and returns
//! [`Output`]s for its driver to carry out: messages to send, timers to arm
//! and events to record. The simulator and the networked binary both drive
//! this same type.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::block::Block;
use crate::consensus::{
    proposal_slot, propose_block, Acceptance, ChainView, EquivocationEvidence, HeadChange,
};
use crate::genesis::Genesis;
use crate::gossip::GossipMessage;
use crate::hash::Digest;
use crate::keys::{Address, KeyPair};
use crate::tx::Transaction;

pub type PeerId = u32;

pub const DEFAULT_POOL_CAPACITY: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Timer {
    /// Try to seal a child of `parent` if it is still the head.
    Propose { parent: Digest },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Input {
    Start,
    Message {
        from: PeerId,
        msg: GossipMessage,
    },
    Timer(Timer),
    /// Transaction submitted by a local client.
    SubmitTx(Transaction),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Broadcast(GossipMessage),
    Send { to: PeerId, msg: GossipMessage },
    SetTimer { at_ms: u64, timer: Timer },
    Event(NodeEvent),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum NodeEvent {
    Produced {
        height: u64,
        digest: Digest,
        weight: u8,
        txs: usize,
    },
    HeadChanged {
        height: u64,
        digest: Digest,
        fork_height: u64,
        reorg: bool,
    },
    BlockRejected {
        height: u64,
        digest: Digest,
        reason: String,
    },
    Equivocation(EquivocationEvidence),
    TxRejected {
        digest: Digest,
        reason: String,
    },
}

#[derive(Clone, Debug)]
pub struct Node {
    key: Option<KeyPair>,
    view: ChainView,
    pool: Vec<Transaction>,
    pool_index: HashSet<Digest>,
    pool_capacity: usize,
}

impl Node {
    /// `key` is `None` for a follower that never seals.
    pub fn new(genesis: &Genesis, key: Option<KeyPair>) -> Self {
        Self::from_view(ChainView::new(genesis), key)
    }

    pub fn from_view(view: ChainView, key: Option<KeyPair>) -> Self {
        Self {
            key,
            view,
            pool: vec![],
            pool_index: HashSet::new(),
            pool_capacity: DEFAULT_POOL_CAPACITY,
        }
    }

    pub fn address(&self) -> Option<Address> {
        self.key.as_ref().map(KeyPair::address)
    }

    pub fn view(&self) -> &ChainView {
        &self.view
    }

    pub fn pool(&self) -> &[Transaction] {
        &self.pool
    }

    /// Next nonce for `addr` counting transactions waiting in the pool.
    pub fn pending_nonce(&self, addr: &Address) -> u64 {
        let base = self.view.head_state().account(addr).nonce;
        self.pool
            .iter()
            .filter(|t| t.sender == *addr && t.nonce >= base)
            .map(|t| t.nonce + 1)
            .max()
            .unwrap_or(base)
    }

    pub fn handle(&mut self, input: Input, now_ms: u64) -> Vec<Output> {
        let mut out = Vec::new();
        match input {
            Input::Start => self.schedule_proposal(now_ms, &mut out),
            Input::Timer(Timer::Propose { parent }) => {
                self.on_propose_timer(parent, now_ms, &mut out)
            }
            Input::Message { from, msg } => match msg {
                GossipMessage::NewBlock(block) | GossipMessage::BlockResponse(block) => {
                    self.on_block(block, Some(from), now_ms, &mut out)
                }
                GossipMessage::RequestBlock(digest) => {
                    if let Some(b) = self.view.get(&digest) {
                        out.push(Output::Send {
                            to: from,
                            msg: GossipMessage::BlockResponse((*b.block).clone()),
                        });
                    }
                }
                GossipMessage::NewTx(tx) => {
                    if let Err(reason) = self.admit_tx(tx.clone()) {
                        tracing::trace!(%reason, "ignored gossiped transaction");
                    } else {
                        out.push(Output::Broadcast(GossipMessage::NewTx(tx)));
                    }
                }
            },
            Input::SubmitTx(tx) => {
                let digest = tx.digest();
                match self.admit_tx(tx.clone()) {
                    Ok(()) => out.push(Output::Broadcast(GossipMessage::NewTx(tx))),
                    Err(reason) => {
                        out.push(Output::Event(NodeEvent::TxRejected { digest, reason }))
                    }
                }
            }
        }
        out
    }

    /// Inserts a block obtained outside gossip, e.g. loaded from disk.
    pub fn import_block(&mut self, block: Block) -> Acceptance {
        let acc = self.view.accept_block(block);
        if let Acceptance::Accepted {
            head_change: Some(hc),
            ..
        } = &acc
        {
            self.prune_pool(hc);
        }
        acc
    }

    fn admit_tx(&mut self, tx: Transaction) -> Result<(), String> {
        let digest = tx.digest();
        if self.pool_index.contains(&digest) {
            return Err("already pending".into());
        }
        if !tx.verify_signature() {
            return Err("invalid signature".into());
        }
        let nonce = self.view.head_state().account(&tx.sender).nonce;
        if tx.nonce < nonce {
            return Err(format!("stale nonce {} (account at {nonce})", tx.nonce));
        }
        if self.pool.len() >= self.pool_capacity {
            return Err("transaction pool full".into());
        }
        self.pool_index.insert(digest);
        self.pool.push(tx);
        Ok(())
    }

    fn schedule_proposal(&self, now_ms: u64, out: &mut Vec<Output>) {
        let Some(key) = &self.key else { return };
        if let Some((earliest, _)) = proposal_slot(&self.view, &key.address()) {
            let at_ms = (earliest * 1000).max(now_ms);
            out.push(Output::SetTimer {
                at_ms,
                timer: Timer::Propose {
                    parent: self.view.head(),
                },
            });
        }
    }

    fn on_propose_timer(&mut self, parent: Digest, now_ms: u64, out: &mut Vec<Output>) {
        if parent != self.view.head() {
            return;
        }
        let Some(key) = &self.key else { return };
        let Some(proposal) = propose_block(&self.view, key, &self.pool, now_ms / 1000) else {
            self.schedule_proposal(now_ms, out);
            return;
        };
        for (digest, err) in &proposal.dropped {
            tracing::debug!(tx = %digest, error = %err, "dropping transaction");
            self.pool_index.remove(digest);
        }
        let dropped: HashSet<Digest> = proposal.dropped.iter().map(|(d, _)| *d).collect();
        self.pool.retain(|t| !dropped.contains(&t.digest()));
        let block = proposal.block;
        let header = block.header.clone();
        out.push(Output::Event(NodeEvent::Produced {
            height: header.height,
            digest: block.digest(),
            weight: header.weight,
            txs: block.txs.len(),
        }));
        self.on_block(block, None, now_ms, out);
    }

    fn on_block(&mut self, block: Block, from: Option<PeerId>, now_ms: u64, out: &mut Vec<Output>) {
        let digest = block.digest();
        let height = block.header.height;
        let evidence_before = self.view.equivocations().len();
        match self.view.accept_block(block) {
            Acceptance::Known => {}
            Acceptance::Orphan { missing } => {
                if let Some(peer) = from {
                    out.push(Output::Send {
                        to: peer,
                        msg: GossipMessage::RequestBlock(missing),
                    });
                }
            }
            Acceptance::Rejected(err) => {
                tracing::debug!(%digest, height, reason = err.reason(), "rejected block");
                out.push(Output::Event(NodeEvent::BlockRejected {
                    height,
                    digest,
                    reason: err.reason().to_string(),
                }));
            }
            Acceptance::Accepted {
                digest,
                connected,
                head_change,
            } => {
                for d in std::iter::once(digest).chain(connected) {
                    let b = (*self.view.get(&d).expect("just accepted").block).clone();
                    out.push(Output::Broadcast(GossipMessage::NewBlock(b)));
                }
                for ev in &self.view.equivocations()[evidence_before..] {
                    tracing::warn!(proposer = %ev.proposer, height = ev.height, "equivocation");
                    out.push(Output::Event(NodeEvent::Equivocation(ev.clone())));
                }
                if let Some(hc) = head_change {
                    let head = self.view.head_block();
                    let reorg =
                        hc.fork_height <= self.view.get(&hc.old_head).map_or(0, |b| b.height());
                    out.push(Output::Event(NodeEvent::HeadChanged {
                        height: head.height(),
                        digest: head.digest,
                        fork_height: hc.fork_height,
                        reorg,
                    }));
                    self.prune_pool(&hc);
                    self.schedule_proposal(now_ms, out);
                }
            }
        }
    }

    /// Drops included transactions and returns those from abandoned blocks.
    fn prune_pool(&mut self, hc: &HeadChange) {
        let mut abandoned = Vec::new();
        let mut cursor = self.view.get(&hc.old_head);
        while let Some(b) = cursor {
            if b.height() < hc.fork_height {
                break;
            }
            abandoned.extend(b.block.txs.iter().cloned());
            cursor = self.view.get(&b.block.header.parent);
        }
        let state = self.view.head_state();
        for tx in abandoned.into_iter().rev() {
            let d = tx.digest();
            if !self.pool_index.contains(&d) && self.pool.len() < self.pool_capacity {
                self.pool_index.insert(d);
                self.pool.insert(0, tx);
            }
        }
        let index = &mut self.pool_index;
        self.pool.retain(|t| {
            let keep = t.nonce >= state.account(&t.sender).nonce;
            if !keep {
                index.remove(&t.digest());
            }
            keep
        });
    }
}
