//! Single-process chain builder for fixtures, tests and tamper experiments.

use crate::block::{Block, BlockHeader};
use crate::consensus::{propose_block, Acceptance, ChainView, Proposal};
use crate::execution::{apply_transaction, BlockContext};
use crate::genesis::{Allocation, Genesis};
use crate::keys::{Address, KeyPair};
use crate::merkle::merkle_root;
use crate::tx::Transaction;
use crate::validators::scheduled_proposer;

/// Deterministic validator keys `validator-0`, `validator-1`, ...
pub fn validator_keys(n: usize) -> Vec<KeyPair> {
    (0..n)
        .map(|i| KeyPair::from_label(&format!("validator-{i}")))
        .collect()
}

/// Genesis for `keys` with `allocation` credited to each validator.
pub fn dev_genesis(keys: &[KeyPair], allocation: u128, timestamp: u64) -> Genesis {
    let mut g = Genesis::new(keys.iter().map(KeyPair::address).collect(), timestamp);
    if allocation > 0 {
        g.allocations = keys
            .iter()
            .map(|k| Allocation {
                address: k.address(),
                amount: allocation,
            })
            .collect();
    }
    g
}

/// A chain where every block is sealed in turn at its slot boundary.
#[derive(Clone, Debug)]
pub struct DevNet {
    genesis: Genesis,
    keys: Vec<KeyPair>,
    view: ChainView,
}

impl DevNet {
    pub fn new(n: usize, allocation: u128) -> Self {
        let keys = validator_keys(n);
        let genesis = dev_genesis(&keys, allocation, 0);
        Self::from_genesis(genesis, keys)
    }

    pub fn from_genesis(genesis: Genesis, keys: Vec<KeyPair>) -> Self {
        let view = ChainView::new(&genesis);
        Self {
            genesis,
            keys,
            view,
        }
    }

    pub fn genesis(&self) -> &Genesis {
        &self.genesis
    }

    pub fn keys(&self) -> &[KeyPair] {
        &self.keys
    }

    /// Makes `key` available for sealing, e.g. after it joins the set.
    pub fn add_key(&mut self, key: KeyPair) {
        self.keys.push(key);
    }

    pub fn key_of(&self, addr: &Address) -> Option<&KeyPair> {
        self.keys.iter().find(|k| k.address() == *addr)
    }

    pub fn view(&self) -> &ChainView {
        &self.view
    }

    pub fn next_nonce(&self, addr: &Address) -> u64 {
        self.view.head_state().account(addr).nonce
    }

    /// Seals the next block with the scheduled proposer at the slot boundary.
    pub fn produce(&mut self, txs: &[Transaction]) -> Proposal {
        let head = self.view.head_block();
        let height = head.height() + 1;
        let proposer = scheduled_proposer(height, head.state.validators());
        let now = head.block.header.timestamp + self.view.config().slot_seconds;
        let key = self
            .key_of(&proposer)
            .expect("scheduled proposer key is known")
            .clone();
        let proposal =
            propose_block(&self.view, &key, txs, now).expect("in-turn proposer may seal");
        match self.view.accept_block(proposal.block.clone()) {
            Acceptance::Accepted { .. } => proposal,
            other => panic!("own block not accepted: {other:?}"),
        }
    }

    pub fn produce_empty(&mut self, count: usize) {
        for _ in 0..count {
            self.produce(&[]);
        }
    }

    /// Canonical blocks from genesis to head.
    pub fn blocks(&self) -> Vec<Block> {
        self.view
            .canonical()
            .iter()
            .map(|d| (*self.view.get(d).unwrap().block).clone())
            .collect()
    }
}

/// Rewrites `blocks` from height `from` on, as a colluding set of validators
/// holding `keys` could. Each rewritten block keeps its proposer, timestamp
/// and weight; `edit` supplies its new transaction list. Transactions that no
/// longer apply are dropped, and every header is re-rooted and re-signed, so
/// the result is internally consistent.
pub fn rewrite_suffix(
    genesis: &Genesis,
    keys: &[KeyPair],
    blocks: &[Block],
    from: u64,
    mut edit: impl FnMut(u64, Vec<Transaction>) -> Vec<Transaction>,
) -> Vec<Block> {
    assert!(from >= 1, "genesis cannot be rewritten");
    let mut view = ChainView::new(genesis);
    let mut out: Vec<Block> = blocks[..from as usize].to_vec();
    for b in &out[1..] {
        assert!(matches!(
            view.accept_block(b.clone()),
            Acceptance::Accepted { .. }
        ));
    }
    for original in &blocks[from as usize..] {
        let height = original.header.height;
        let parent = view.head_block();
        let h = &original.header;
        let ctx = BlockContext::new(&parent.state, height, h.timestamp, h.proposer);
        let mut state = (*parent.state).clone();
        let txs: Vec<Transaction> = edit(height, original.txs.clone())
            .into_iter()
            .filter(|tx| apply_transaction(&mut state, tx, &ctx).is_ok())
            .collect();
        let tx_digests: Vec<_> = txs.iter().map(Transaction::digest).collect();
        let mut header = BlockHeader {
            height,
            parent: parent.digest,
            state_root: state.state_root(),
            tx_root: merkle_root(&tx_digests),
            proposer: h.proposer,
            timestamp: h.timestamp,
            weight: h.weight,
            signature: None,
        };
        let key = keys
            .iter()
            .find(|k| k.address() == h.proposer)
            .expect("colluding key for proposer");
        header.sign(key);
        let block = Block { header, txs };
        match view.accept_block(block.clone()) {
            Acceptance::Accepted { .. } => out.push(block),
            other => panic!("rewritten block {height} not accepted: {other:?}"),
        }
    }
    out
}
