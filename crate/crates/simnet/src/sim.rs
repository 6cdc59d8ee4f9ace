use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use poa_core::anchoring::{
    AnchorAgent, AnchorError, AnchorPolicy, ManualClock, MockWitness, WitnessClient,
};
use poa_core::consensus::propose_on;
use poa_core::devnet::{dev_genesis, validator_keys};
use poa_core::gossip::GossipMessage;
use poa_core::node::{Input, Node, NodeEvent, Output, Timer};
use poa_core::validators::scheduled_proposer;
use poa_core::{Block, Genesis, KeyPair, Transaction, TxKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Behavior, LatencyDistribution, SimConfig};
use crate::trace::{
    AnchorEvent, AnchorFailure, AnchorTrace, CanonicalEntry, HeadRecord, Metrics, NodeTrace,
    ProducedRecord, Rejection, SimTrace,
};
use crate::SimError;

/// Balance credited to every validator at genesis.
pub const GENESIS_ALLOCATION: u128 = 1_000_000_000_000_000_000;

const ANCHOR_TICK_MS: u64 = 1_000;

#[derive(Debug)]
enum Payload {
    Start,
    Deliver {
        from: usize,
        msg: Box<GossipMessage>,
    },
    Timer(Timer),
    WorkloadTick,
    AnchorTick,
}

#[derive(Debug)]
struct Scheduled {
    at_ms: u64,
    seq: u64,
    target: usize,
    payload: Payload,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.at_ms, self.seq) == (other.at_ms, other.seq)
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at_ms, other.seq).cmp(&(self.at_ms, self.seq))
    }
}

struct AnchorState {
    node: usize,
    agent: AnchorAgent,
    witness: MockWitness,
    clock: ManualClock,
    anchors: Vec<AnchorEvent>,
    failures: Vec<AnchorFailure>,
}

/// A running simulation. Single-threaded; all randomness comes from `config.seed`.
pub struct Simulation {
    config: SimConfig,
    genesis: Genesis,
    keys: Vec<KeyPair>,
    stale_keys: Vec<KeyPair>,
    nodes: Vec<Node>,
    traces: Vec<NodeTrace>,
    queue: BinaryHeap<Scheduled>,
    seq: u64,
    now_ms: u64,
    net_rng: ChaCha8Rng,
    work_rng: ChaCha8Rng,
    twinned: BTreeSet<(usize, u64)>,
    produced: Vec<ProducedRecord>,
    anchor: Option<AnchorState>,
    delivered: u64,
    dropped: u64,
    submitted: u64,
    end_ms: u64,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let n = config.n_validators;
        let keys = validator_keys(n);
        let mut genesis = dev_genesis(&keys, GENESIS_ALLOCATION, 0);
        genesis.consensus = config.consensus;
        let nodes: Vec<Node> = keys
            .iter()
            .map(|k| Node::new(&genesis, Some(k.clone())))
            .collect();
        let traces = keys
            .iter()
            .enumerate()
            .map(|(id, k)| NodeTrace {
                id,
                address: k.address(),
                behavior: config.byzantine.get(&id).copied(),
                head_history: vec![],
                finalized: vec![],
                finality_reversions: vec![],
                rejections: vec![],
                equivocations: vec![],
                balance_sum: String::new(),
                total_minted: String::new(),
            })
            .collect();
        let anchor = config.anchoring.as_ref().map(|a| {
            let clock = ManualClock::new(0);
            let mut witness = MockWitness::new(clock.clone()).with_latency(
                a.witness_latency_ms.0,
                a.witness_latency_ms.1,
                config.seed ^ 0xa5a5,
            );
            for &(s, e) in &a.outages {
                witness = witness.with_outage(s * 1000, e * 1000);
            }
            let policy = AnchorPolicy {
                interval_seconds: a.interval_seconds,
                retry_base_seconds: a.retry_base_seconds,
                ..AnchorPolicy::default()
            };
            AnchorState {
                node: config.anchor_node().expect("validated"),
                agent: AnchorAgent::new(policy, genesis.timestamp),
                witness,
                clock,
                anchors: vec![],
                failures: vec![],
            }
        });
        let mut sim = Self {
            stale_keys: (0..n)
                .map(|i| KeyPair::from_label(&format!("stale-{i}")))
                .collect(),
            net_rng: ChaCha8Rng::seed_from_u64(config.seed),
            work_rng: ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
            config,
            genesis,
            keys,
            nodes,
            traces,
            queue: BinaryHeap::new(),
            seq: 0,
            now_ms: 0,
            twinned: BTreeSet::new(),
            produced: vec![],
            anchor,
            delivered: 0,
            dropped: 0,
            submitted: 0,
            end_ms: 0,
        };
        for i in 0..n {
            sim.schedule(0, i, Payload::Start);
        }
        if sim.config.workload.tx_per_slot > 0 {
            let first = sim.config.consensus.slot_seconds * 1000 / 2;
            sim.schedule(first, 0, Payload::WorkloadTick);
        }
        if sim.anchor.is_some() {
            sim.schedule(ANCHOR_TICK_MS, 0, Payload::AnchorTick);
        }
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn genesis(&self) -> &Genesis {
        &self.genesis
    }

    pub fn keys(&self) -> &[KeyPair] {
        &self.keys
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    /// Canonical chain of `id` from genesis to its head.
    pub fn canonical_blocks(&self, id: usize) -> Vec<Block> {
        let view = self.nodes[id].view();
        view.canonical()
            .iter()
            .map(|d| (*view.get(d).expect("canonical").block).clone())
            .collect()
    }

    /// Anchor log kept by the agent, if anchoring is enabled.
    pub fn anchor_agent(&self) -> Option<&AnchorAgent> {
        self.anchor.as_ref().map(|a| &a.agent)
    }

    pub fn witness(&self) -> Option<&MockWitness> {
        self.anchor.as_ref().map(|a| &a.witness)
    }

    fn schedule(&mut self, at_ms: u64, target: usize, payload: Payload) {
        self.seq += 1;
        self.queue.push(Scheduled {
            at_ms,
            seq: self.seq,
            target,
            payload,
        });
    }

    /// Processes every event up to and including `end_ms`.
    pub fn run_until(&mut self, end_ms: u64) {
        while self.queue.peek().is_some_and(|e| e.at_ms <= end_ms) {
            let ev = self.queue.pop().expect("peeked");
            self.now_ms = ev.at_ms;
            self.step(ev);
        }
        self.now_ms = self.now_ms.max(end_ms);
        self.end_ms = self.end_ms.max(end_ms);
    }

    /// Delivers messages still in flight, including the relays they trigger,
    /// without firing further timers. Leaves the queue empty.
    pub fn drain_in_flight(&mut self) {
        while let Some(ev) = self.queue.pop() {
            if matches!(ev.payload, Payload::Deliver { .. }) {
                self.now_ms = ev.at_ms;
                self.step(ev);
            }
        }
    }

    fn step(&mut self, ev: Scheduled) {
        let now = ev.at_ms;
        let i = ev.target;
        match ev.payload {
            Payload::Start => {
                let out = self.nodes[i].handle(Input::Start, now);
                self.dispatch(i, out);
            }
            Payload::Deliver { from, msg } => {
                self.delivered += 1;
                let out = self.nodes[i].handle(
                    Input::Message {
                        from: from as u32,
                        msg: *msg,
                    },
                    now,
                );
                self.dispatch(i, out);
            }
            Payload::Timer(t) => {
                let out = self.nodes[i].handle(Input::Timer(t), now);
                self.dispatch(i, out);
            }
            Payload::WorkloadTick => {
                self.workload(now);
                let next = now + self.config.consensus.slot_seconds * 1000;
                self.schedule(next, 0, Payload::WorkloadTick);
            }
            Payload::AnchorTick => {
                self.anchor_tick(now);
                self.schedule(now + ANCHOR_TICK_MS, 0, Payload::AnchorTick);
            }
        }
    }

    fn workload(&mut self, now: u64) {
        let honest = self.config.honest_nodes();
        if honest.is_empty() {
            return;
        }
        let n = self.config.n_validators;
        for _ in 0..self.config.workload.tx_per_slot {
            let s = honest[self.work_rng.gen_range(0..honest.len())];
            let to = self.keys[self.work_rng.gen_range(0..n)].address();
            let amount = self.work_rng.gen_range(1..=1_000u128);
            let key = &self.keys[s];
            let nonce = self.nodes[s].pending_nonce(&key.address());
            let tx = Transaction::signed(key, nonce, 21, TxKind::Transfer { to, amount });
            self.submitted += 1;
            let out = self.nodes[s].handle(Input::SubmitTx(tx), now);
            self.dispatch(s, out);
        }
    }

    fn anchor_tick(&mut self, now: u64) {
        let Some(a) = self.anchor.as_mut() else {
            return;
        };
        a.clock.set_ms(now);
        match a
            .agent
            .maybe_anchor(self.nodes[a.node].view(), now / 1000, &mut a.witness)
        {
            Ok(Some(anchor)) => a.anchors.push(AnchorEvent {
                at_ms: now,
                height: anchor.height,
                digest: anchor.block_digest,
                witness_ref: anchor.witness_ref,
            }),
            Ok(None) => {}
            Err(AnchorError::WitnessUnavailable { retry_at, .. }) => {
                a.failures.push(AnchorFailure {
                    at_ms: now,
                    retry_at_s: retry_at,
                })
            }
        }
    }

    fn dispatch(&mut self, i: usize, outputs: Vec<Output>) {
        let behavior = self.config.byzantine.get(&i).copied();
        for o in outputs {
            match o {
                Output::Event(e) => self.record(i, e),
                Output::SetTimer { at_ms, timer } => self.schedule(at_ms, i, Payload::Timer(timer)),
                Output::Broadcast(msg) => {
                    if behavior == Some(Behavior::Withhold) {
                        continue;
                    }
                    if behavior == Some(Behavior::Equivocate) {
                        if let Some((msg, twin)) = self.twin_of(i, &msg) {
                            let peers: Vec<usize> =
                                (0..self.config.n_validators).filter(|&j| j != i).collect();
                            let half = peers.len() / 2;
                            for (k, &j) in peers.iter().enumerate() {
                                let m = if k < half { msg.clone() } else { twin.clone() };
                                self.send(i, j, m);
                            }
                            continue;
                        }
                    }
                    let msg = self.restamp(i, behavior, msg);
                    for j in 0..self.config.n_validators {
                        if j != i {
                            self.send(i, j, msg.clone());
                        }
                    }
                }
                Output::Send { to, msg } => {
                    if behavior == Some(Behavior::Withhold) {
                        continue;
                    }
                    let msg = self.restamp(i, behavior, msg);
                    self.send(i, to as usize, msg);
                }
            }
        }
    }

    /// For an equivocator's freshly sealed block, a conflicting sibling.
    fn twin_of(&mut self, i: usize, msg: &GossipMessage) -> Option<(GossipMessage, GossipMessage)> {
        let GossipMessage::NewBlock(b) = msg else {
            return None;
        };
        let me = self.keys[i].address();
        if b.header.proposer != me || !self.twinned.insert((i, b.header.height)) {
            return None;
        }
        let view = self.nodes[i].view();
        let twin = propose_on(
            view,
            &b.header.parent,
            &self.keys[i],
            &[],
            b.header.timestamp + 1,
        )?
        .block;
        Some((msg.clone(), GossipMessage::NewBlock(twin)))
    }

    /// Re-signs a stale signer's own blocks with its unregistered key.
    fn restamp(&self, i: usize, behavior: Option<Behavior>, msg: GossipMessage) -> GossipMessage {
        if behavior != Some(Behavior::StaleSign) {
            return msg;
        }
        let me = self.keys[i].address();
        let resign = |mut b: Block| {
            if b.header.proposer == me {
                b.header.sign(&self.stale_keys[i]);
            }
            b
        };
        match msg {
            GossipMessage::NewBlock(b) => GossipMessage::NewBlock(resign(b)),
            GossipMessage::BlockResponse(b) => GossipMessage::BlockResponse(resign(b)),
            other => other,
        }
    }

    fn send(&mut self, from: usize, to: usize, msg: GossipMessage) {
        let now = self.now_ms;
        if self
            .config
            .partitions
            .iter()
            .any(|p| p.separates(now, from, to))
        {
            self.dropped += 1;
            return;
        }
        if self.config.loss > 0.0 && self.net_rng.gen::<f64>() < self.config.loss {
            self.dropped += 1;
            return;
        }
        let lat = &self.config.latency;
        let delay = match lat.distribution {
            LatencyDistribution::Fixed => lat.min_ms,
            LatencyDistribution::Uniform => self.net_rng.gen_range(lat.min_ms..=lat.max_ms),
        };
        self.schedule(
            now + delay,
            to,
            Payload::Deliver {
                from,
                msg: Box::new(msg),
            },
        );
    }

    fn record(&mut self, i: usize, event: NodeEvent) {
        let now = self.now_ms;
        match event {
            NodeEvent::Produced {
                height,
                digest,
                weight,
                txs,
            } => self.produced.push(ProducedRecord {
                at_ms: now,
                node: i,
                height,
                digest,
                weight,
                txs,
            }),
            NodeEvent::HeadChanged {
                height,
                digest,
                fork_height,
                ..
            } => {
                self.traces[i].head_history.push(HeadRecord {
                    at_ms: now,
                    height,
                    digest,
                });
                self.update_finality(i, fork_height);
            }
            NodeEvent::BlockRejected {
                height,
                digest,
                reason,
            } => self.traces[i].rejections.push(Rejection {
                at_ms: now,
                height,
                digest,
                reason,
            }),
            NodeEvent::Equivocation(ev) => self.traces[i].equivocations.push(ev),
            NodeEvent::TxRejected { .. } => {}
        }
    }

    fn update_finality(&mut self, i: usize, fork_height: u64) {
        let view = self.nodes[i].view();
        let trace = &mut self.traces[i];
        let canonical = view.canonical();
        let recorded = trace.finalized.len() as u64;
        for h in fork_height.min(recorded)..recorded {
            if canonical.get(h as usize) != Some(&trace.finalized[h as usize]) {
                trace.finality_reversions.push(h);
            }
        }
        if let Some(f) = view.final_height() {
            for h in recorded..=f {
                trace.finalized.push(canonical[h as usize]);
            }
        }
    }

    /// Snapshot of everything observed so far.
    pub fn trace(&self) -> SimTrace {
        let duration_s = self.end_ms / 1000;
        let mut nodes = self.traces.clone();
        for (t, node) in nodes.iter_mut().zip(&self.nodes) {
            let state = node.view().head_state();
            t.balance_sum = state.balance_sum().to_string();
            t.total_minted = state.total_minted().to_string();
        }
        let reference_node = self.config.honest_nodes().first().copied().unwrap_or(0);
        let view = self.nodes[reference_node].view();
        let mut canonical = Vec::with_capacity(view.canonical().len());
        for d in &view.canonical()[1..] {
            let b = view.get(d).expect("canonical");
            let parent = view.get(&b.block.header.parent).expect("parent");
            canonical.push(CanonicalEntry {
                height: b.height(),
                digest: *d,
                proposer: b.block.header.proposer,
                scheduled: scheduled_proposer(b.height(), parent.state.validators()),
                weight: b.block.header.weight,
                timestamp: b.block.header.timestamp,
                txs: b.block.txs.len(),
            });
        }
        let canonical_height = view.head_height();
        let canonical_txs: u64 = canonical.iter().map(|c| c.txs as u64).sum();
        let per_second = |x: u64| {
            if duration_s == 0 {
                0.0
            } else {
                x as f64 / duration_s as f64
            }
        };
        let anchoring = self.anchor.as_ref().map(|a| {
            let settings = self
                .config
                .anchoring
                .as_ref()
                .expect("anchoring configured");
            AnchorTrace {
                node: a.node,
                interval_seconds: settings.interval_seconds,
                anchors: a.anchors.clone(),
                failures: a.failures.clone(),
                gaps: a.agent.gaps().to_vec(),
                witness: a.witness.fetch_all(),
            }
        });
        SimTrace {
            config: self.config.clone(),
            duration_s,
            nodes,
            produced: self.produced.clone(),
            reference_node,
            canonical,
            anchoring,
            delivered_messages: self.delivered,
            dropped_messages: self.dropped,
            metrics: Metrics {
                duration_s,
                canonical_height,
                canonical_txs,
                blocks_per_second: per_second(canonical_height),
                tx_per_second: per_second(canonical_txs),
                submitted_txs: self.submitted,
            },
        }
    }
}

/// Runs `config` for `duration_s` virtual seconds, then lets messages already
/// in flight arrive.
pub fn run(config: SimConfig, duration_s: u64) -> Result<SimTrace, SimError> {
    let mut sim = Simulation::new(config)?;
    sim.run_until(duration_s * 1000);
    sim.drain_in_flight();
    Ok(sim.trace())
}
