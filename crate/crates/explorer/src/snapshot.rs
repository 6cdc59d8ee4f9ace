use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use poa_core::anchoring::Anchor;
use poa_core::consensus::ChainView;
use poa_core::docstore::DocStore;
use poa_core::{Address, Digest};

/// Where a transaction sits on the canonical chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxLocation {
    pub height: u64,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Sent,
    Received,
}

/// Immutable chain state at one block boundary, plus lookup indices.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub view: ChainView,
    pub anchors: Vec<Anchor>,
    pub docstore: Option<DocStore>,
    tx_index: HashMap<Digest, TxLocation>,
    history: BTreeMap<Address, Vec<(TxLocation, Direction)>>,
}

impl Snapshot {
    pub fn new(view: ChainView, anchors: Vec<Anchor>, docstore: Option<DocStore>) -> Self {
        let mut tx_index = HashMap::new();
        let mut history: BTreeMap<Address, Vec<(TxLocation, Direction)>> = BTreeMap::new();
        for (height, d) in view.canonical().iter().enumerate() {
            let block = &view.get(d).expect("canonical block").block;
            for (index, tx) in block.txs.iter().enumerate() {
                let loc = TxLocation {
                    height: height as u64,
                    index,
                };
                tx_index.insert(tx.digest(), loc);
                history
                    .entry(tx.sender)
                    .or_default()
                    .push((loc, Direction::Sent));
                if let Some(to) = tx.kind.recipient() {
                    if to != tx.sender {
                        history
                            .entry(to)
                            .or_default()
                            .push((loc, Direction::Received));
                    }
                }
            }
        }
        Self {
            view,
            anchors,
            docstore,
            tx_index,
            history,
        }
    }

    pub fn head_height(&self) -> u64 {
        self.view.head_height()
    }

    pub fn locate_tx(&self, digest: &Digest) -> Option<TxLocation> {
        self.tx_index.get(digest).copied()
    }

    /// Transactions touching `addr`, newest first.
    pub fn history(&self, addr: &Address) -> Vec<(TxLocation, Direction)> {
        let mut items = self.history.get(addr).cloned().unwrap_or_default();
        items.reverse();
        items
    }
}

/// Handoff point between the consensus loop (writer) and request handlers.
#[derive(Clone, Debug)]
pub struct SharedSnapshot(Arc<RwLock<Arc<Snapshot>>>);

impl SharedSnapshot {
    pub fn new(snapshot: Snapshot) -> Self {
        Self(Arc::new(RwLock::new(Arc::new(snapshot))))
    }

    pub fn load(&self) -> Arc<Snapshot> {
        self.0.read().expect("snapshot lock").clone()
    }

    pub fn publish(&self, snapshot: Snapshot) {
        *self.0.write().expect("snapshot lock") = Arc::new(snapshot);
    }
}
