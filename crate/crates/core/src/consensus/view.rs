use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fork_choice::{fork_choice, TipInfo};
use super::verify::{verify_block, BlockError};
use super::{signer_limit, ConsensusConfig};
use crate::block::Block;
use crate::execution::Receipt;
use crate::genesis::Genesis;
use crate::hash::Digest;
use crate::keys::Address;
use crate::state::WorldState;

const MAX_ORPHANS: usize = 4096;

/// A verified block with the state it produces.
#[derive(Clone, Debug)]
pub struct StoredBlock {
    pub digest: Digest,
    pub block: Arc<Block>,
    pub state: Arc<WorldState>,
    pub receipts: Arc<Vec<Receipt>>,
    pub cumulative_weight: u64,
}

impl StoredBlock {
    pub fn height(&self) -> u64 {
        self.block.header.height
    }

    pub fn tip_info(&self) -> TipInfo {
        TipInfo {
            digest: self.digest,
            height: self.height(),
            cumulative_weight: self.cumulative_weight,
        }
    }
}

/// Two distinct blocks sealed by one proposer at one height.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivocationEvidence {
    pub proposer: Address,
    pub height: u64,
    pub first: Digest,
    pub second: Digest,
}

/// Canonical chain movement caused by an accepted block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadChange {
    pub old_head: Digest,
    pub new_head: Digest,
    /// Lowest height whose canonical block changed.
    pub fork_height: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Acceptance {
    Accepted {
        digest: Digest,
        /// Buffered descendants that connected through this block.
        connected: Vec<Digest>,
        head_change: Option<HeadChange>,
    },
    /// Already known; nothing changed.
    Known,
    /// Parent unknown; buffered until it arrives.
    Orphan {
        missing: Digest,
    },
    Rejected(BlockError),
}

/// One node's view of the block tree.
#[derive(Clone, Debug)]
pub struct ChainView {
    config: ConsensusConfig,
    blocks: HashMap<Digest, StoredBlock>,
    children: HashMap<Digest, Vec<Digest>>,
    canonical: Vec<Digest>,
    orphans: HashMap<Digest, Vec<Block>>,
    orphan_count: usize,
    sealed: HashMap<(u64, Address), Digest>,
    equivocations: Vec<EquivocationEvidence>,
    flagged: BTreeSet<Address>,
}

impl ChainView {
    pub fn new(genesis: &Genesis) -> Self {
        let block = genesis.block();
        let digest = block.digest();
        let stored = StoredBlock {
            digest,
            block: Arc::new(block),
            state: Arc::new(genesis.initial_state()),
            receipts: Arc::new(vec![]),
            cumulative_weight: 0,
        };
        Self {
            config: genesis.consensus,
            blocks: HashMap::from([(digest, stored)]),
            children: HashMap::new(),
            canonical: vec![digest],
            orphans: HashMap::new(),
            orphan_count: 0,
            sealed: HashMap::new(),
            equivocations: vec![],
            flagged: BTreeSet::new(),
        }
    }

    pub fn config(&self) -> &ConsensusConfig {
        &self.config
    }

    pub fn genesis(&self) -> &StoredBlock {
        &self.blocks[&self.canonical[0]]
    }

    pub fn head(&self) -> Digest {
        *self.canonical.last().expect("genesis always present")
    }

    pub fn head_block(&self) -> &StoredBlock {
        &self.blocks[&self.head()]
    }

    pub fn head_height(&self) -> u64 {
        self.head_block().height()
    }

    pub fn head_state(&self) -> &WorldState {
        &self.head_block().state
    }

    pub fn get(&self, digest: &Digest) -> Option<&StoredBlock> {
        self.blocks.get(digest)
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.blocks.contains_key(digest)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Canonical block digests indexed by height.
    pub fn canonical(&self) -> &[Digest] {
        &self.canonical
    }

    pub fn canonical_at(&self, height: u64) -> Option<&StoredBlock> {
        self.canonical.get(height as usize).map(|d| &self.blocks[d])
    }

    pub fn is_canonical(&self, digest: &Digest) -> bool {
        self.blocks
            .get(digest)
            .is_some_and(|b| self.canonical.get(b.height() as usize) == Some(digest))
    }

    /// Burial depth treated as final: one full rotation of the head's validator set.
    pub fn finality_depth(&self) -> u64 {
        self.head_state().validators().len() as u64
    }

    /// Height of the deepest final canonical block, if any block is final.
    pub fn final_height(&self) -> Option<u64> {
        self.head_height().checked_sub(self.finality_depth())
    }

    pub fn is_final(&self, digest: &Digest) -> bool {
        self.is_canonical(digest)
            && self
                .final_height()
                .is_some_and(|f| self.blocks[digest].height() <= f)
    }

    pub fn tips(&self) -> Vec<TipInfo> {
        let mut tips: Vec<TipInfo> = self
            .blocks
            .values()
            .filter(|b| self.children.get(&b.digest).is_none_or(Vec::is_empty))
            .map(StoredBlock::tip_info)
            .collect();
        tips.sort_by(|a, b| b.preference(a));
        tips
    }

    /// Recomputes the preferred tip from scratch over all known tips.
    pub fn fork_choice(&self) -> Digest {
        fork_choice(&self.tips()).expect("genesis always present")
    }

    pub fn equivocations(&self) -> &[EquivocationEvidence] {
        &self.equivocations
    }

    pub fn flagged(&self) -> &BTreeSet<Address> {
        &self.flagged
    }

    pub fn orphan_count(&self) -> usize {
        self.orphan_count
    }

    /// Proposers of up to `count` most recent non-genesis ancestors, newest first,
    /// starting at `from`.
    pub fn recent_signers(&self, from: &Digest, count: usize) -> Vec<Address> {
        let mut out = Vec::with_capacity(count);
        let mut cursor = self.blocks.get(from);
        while let Some(b) = cursor {
            if out.len() == count || b.height() == 0 {
                break;
            }
            out.push(b.block.header.proposer);
            cursor = self.blocks.get(&b.block.header.parent);
        }
        out
    }

    /// Whether `who` sealed one of the blocks that bar it from sealing a child of `parent`.
    pub fn recently_signed(&self, parent: &Digest, who: &Address) -> bool {
        let Some(p) = self.blocks.get(parent) else {
            return false;
        };
        let window = signer_limit(p.state.validators().len()) - 1;
        self.recent_signers(parent, window).contains(who)
    }

    /// Verifies and inserts `block`, then any buffered descendants.
    pub fn accept_block(&mut self, block: Block) -> Acceptance {
        let digest = block.digest();
        if self.blocks.contains_key(&digest) {
            return Acceptance::Known;
        }
        let parent = block.header.parent;
        if !self.blocks.contains_key(&parent) {
            if block.header.height == 0 {
                return Acceptance::Rejected(BlockError::BadGenesis);
            }
            self.buffer_orphan(block);
            return Acceptance::Orphan { missing: parent };
        }
        let old_head = self.head();
        if let Err(e) = self.insert(block) {
            return Acceptance::Rejected(e);
        }
        let mut connected = Vec::new();
        let mut queue = vec![digest];
        while let Some(d) = queue.pop() {
            for child in self.orphans.remove(&d).unwrap_or_default() {
                self.orphan_count -= 1;
                let cd = child.digest();
                if self.blocks.contains_key(&cd) {
                    continue;
                }
                if self.insert(child).is_ok() {
                    connected.push(cd);
                    queue.push(cd);
                }
            }
        }
        let candidates: Vec<Digest> = std::iter::once(digest)
            .chain(connected.iter().copied())
            .collect();
        let head_change = self.update_head(old_head, &candidates);
        Acceptance::Accepted {
            digest,
            connected,
            head_change,
        }
    }

    fn buffer_orphan(&mut self, block: Block) {
        if self.orphan_count >= MAX_ORPHANS {
            self.orphans.clear();
            self.orphan_count = 0;
        }
        let list = self.orphans.entry(block.header.parent).or_default();
        if !list.iter().any(|b| b == &block) {
            list.push(block);
            self.orphan_count += 1;
        }
    }

    fn insert(&mut self, block: Block) -> Result<(), BlockError> {
        let parent = &self.blocks[&block.header.parent];
        let window = signer_limit(parent.state.validators().len()) - 1;
        let recent = self.recent_signers(&parent.digest, window);
        let (state, receipts) = verify_block(
            &parent.block.header,
            &parent.state,
            &recent,
            &block,
            &self.config,
        )?;
        let digest = block.digest();
        let header = &block.header;
        let slot = (header.height, header.proposer);
        match self.sealed.get(&slot) {
            Some(first) if *first != digest => {
                self.equivocations.push(EquivocationEvidence {
                    proposer: header.proposer,
                    height: header.height,
                    first: *first,
                    second: digest,
                });
                self.flagged.insert(header.proposer);
            }
            Some(_) => {}
            None => {
                self.sealed.insert(slot, digest);
            }
        }
        let stored = StoredBlock {
            digest,
            cumulative_weight: parent.cumulative_weight + header.weight as u64,
            block: Arc::new(block),
            state: Arc::new(state),
            receipts: Arc::new(receipts),
        };
        self.children
            .entry(stored.block.header.parent)
            .or_default()
            .push(digest);
        self.blocks.insert(digest, stored);
        Ok(())
    }

    /// Moves the head to the preferred block among the old head and the newly
    /// inserted ones. Cumulative weight strictly grows along every path, so the
    /// preferred block overall is always a tip and this matches a full
    /// recomputation over all tips.
    fn update_head(&mut self, old_head: Digest, candidates: &[Digest]) -> Option<HeadChange> {
        let mut best = self.blocks[&old_head].tip_info();
        for d in candidates {
            let t = self.blocks[d].tip_info();
            if t.preference(&best).is_gt() {
                best = t;
            }
        }
        if best.digest == old_head {
            return None;
        }
        let mut path = Vec::new();
        let mut cursor = best.digest;
        loop {
            let b = &self.blocks[&cursor];
            let h = b.height() as usize;
            if self.canonical.get(h) == Some(&cursor) {
                break;
            }
            path.push(cursor);
            cursor = b.block.header.parent;
        }
        let fork_height = self.blocks[&cursor].height() + 1;
        self.canonical.truncate(fork_height as usize);
        self.canonical.extend(path.into_iter().rev());
        Some(HeadChange {
            old_head,
            new_head: best.digest,
            fork_height,
        })
    }

    /// Competing tips other than the head, heaviest first.
    pub fn competing_tips(&self) -> Vec<TipInfo> {
        let head = self.head();
        self.tips()
            .into_iter()
            .filter(|t| t.digest != head)
            .collect()
    }

    /// Known blocks grouped by height, for diagnostics.
    pub fn blocks_by_height(&self) -> BTreeMap<u64, Vec<Digest>> {
        let mut out: BTreeMap<u64, Vec<Digest>> = BTreeMap::new();
        for b in self.blocks.values() {
            out.entry(b.height()).or_default().push(b.digest);
        }
        for v in out.values_mut() {
            v.sort();
        }
        out
    }
}
