//! Networked driver for [`poa_core::node::Node`].
//!
//! The consensus loop owns the node and is the only writer of chain state.
//! Connection tasks, timers and the anchoring task talk to it over one
//! channel; the explorer only ever sees published snapshots.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use poa_core::anchoring::{Anchor, AnchorAgent, AnchorLog, FileWitness, WitnessClient};
use poa_core::docstore::DocStore;
use poa_core::export::{read_export, write_export, ExportError};
use poa_core::genesis::Genesis;
use poa_core::gossip::GossipMessage;
use poa_core::node::{Input, Node, NodeEvent, Output, PeerId, Timer};
use poa_core::validation::{validate_chain, ValidationReport, Violation};
use poa_core::{Block, KeyPair};
use poa_explorer::{ExplorerState, SharedSnapshot, Snapshot};
use serde_json::json;
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{mpsc, watch};

use crate::config::{NodeConfig, WitnessAdapter};
use crate::error::CliError;
use crate::keyfile::read_key;
use crate::net::{read_frame, write_frame};

const PERSIST_EVERY: Duration = Duration::from_secs(5);
const ANCHOR_TICK: Duration = Duration::from_secs(1);
const REDIAL_AFTER: Duration = Duration::from_secs(1);

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .expect("clock after 1970")
        .as_millis() as u64
}

/// Loads the persisted canonical chain, refusing anything that does not
/// replay cleanly from `genesis`. A missing file is an empty chain.
pub fn load_chain(path: &Path, genesis: &Genesis) -> Result<Vec<Block>, CliError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![genesis.block()]),
        Err(e) => {
            return Err(CliError::Io {
                path: path.to_owned(),
                source: e,
            })
        }
    };
    let corrupt = |report: ValidationReport| CliError::CorruptDataDir {
        path: path.to_owned(),
        report: Box::new(report),
    };
    let blocks = read_export(std::io::BufReader::new(file)).map_err(|e| {
        let height = match &e {
            ExportError::Decode { index, .. } => *index as u64,
            _ => 0,
        };
        corrupt(ValidationReport {
            valid_blocks: 0,
            head: None,
            violation: Some(Violation {
                height,
                reason: "undecodable".into(),
                detail: e.to_string(),
            }),
        })
    })?;
    let report = validate_chain(&blocks, genesis);
    if !report.is_ok() {
        return Err(corrupt(report));
    }
    Ok(blocks)
}

/// Atomically replaces `path` with the canonical chain.
pub fn persist_chain(path: &Path, node: &Node) -> Result<(), CliError> {
    let view = node.view();
    let tmp = path.with_extension("bin.tmp");
    let write = || -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(&tmp)?);
        write_export(
            &mut out,
            view.canonical()
                .iter()
                .map(|d| view.get(d).expect("canonical").block.as_ref()),
        )?;
        out.flush()?;
        out.get_ref().sync_all()?;
        drop(out);
        std::fs::rename(&tmp, path)
    };
    write().map_err(CliError::io(path))
}

/// Startup state checked before any task is spawned, so configuration
/// errors surface as a clean exit.
pub struct Prepared {
    pub config: NodeConfig,
    pub genesis: Genesis,
    pub key: Option<KeyPair>,
    pub node: Node,
    pub anchors: Vec<Anchor>,
    pub docstore: DocStore,
}

pub fn prepare(config: NodeConfig) -> Result<Prepared, CliError> {
    let genesis = Genesis::load(&config.genesis).map_err(|source| CliError::Genesis {
        path: config.genesis.clone(),
        source,
    })?;
    let key = config.key_file.as_deref().map(read_key).transpose()?;
    std::fs::create_dir_all(&config.data_dir).map_err(CliError::io(&config.data_dir))?;
    let blocks = load_chain(&config.chain_file(), &genesis)?;
    let mut node = Node::new(&genesis, key.clone());
    for b in blocks.into_iter().skip(1) {
        node.import_block(b);
    }
    let anchors = AnchorLog::load(&config.anchor_log_file())?;
    let docstore = DocStore::open(config.docstore_dir())?;
    Ok(Prepared {
        config,
        genesis,
        key,
        node,
        anchors,
        docstore,
    })
}

enum Event {
    Connected {
        peer: PeerId,
        outbox: mpsc::UnboundedSender<GossipMessage>,
    },
    Message {
        peer: PeerId,
        msg: Box<GossipMessage>,
    },
    Disconnected(PeerId),
    Timer(Timer),
    Anchored(Anchor),
}

/// Addresses actually bound, useful when the config asked for port 0.
#[derive(Clone, Copy, Debug)]
pub struct Bound {
    pub gossip: SocketAddr,
    pub explorer: Option<SocketAddr>,
}

/// Runs until `shutdown` resolves, then persists the chain.
pub async fn run(
    prepared: Prepared,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
    on_bound: impl FnOnce(Bound),
) -> Result<(), CliError> {
    let Prepared {
        config,
        genesis,
        key,
        mut node,
        anchors,
        docstore,
    } = prepared;
    let (events_tx, mut events) = mpsc::unbounded_channel::<Event>();
    let (stop_tx, stop_rx) = watch::channel(false);

    let gossip = TcpListener::bind(config.gossip.listen)
        .await
        .map_err(|e| CliError::Io {
            path: config.gossip.listen.to_string().into(),
            source: e,
        })?;
    let gossip_addr = gossip
        .local_addr()
        .map_err(CliError::io("gossip listener"))?;
    let next_peer = Arc::new(AtomicU32::new(1));
    tokio::spawn(accept_loop(
        gossip,
        events_tx.clone(),
        next_peer.clone(),
        stop_rx.clone(),
    ));
    for peer in &config.gossip.peers {
        tokio::spawn(dial_loop(
            *peer,
            events_tx.clone(),
            next_peer.clone(),
            stop_rx.clone(),
        ));
    }

    let shared = SharedSnapshot::new(Snapshot::new(
        node.view().clone(),
        anchors.clone(),
        Some(docstore.clone()),
    ));
    let mut explorer_addr = None;
    if let Some(listen) = config.explorer.listen {
        let listener = TcpListener::bind(listen).await.map_err(|e| CliError::Io {
            path: listen.to_string().into(),
            source: e,
        })?;
        explorer_addr = listener.local_addr().ok();
        let state = if config.explorer.tokens.is_empty() {
            ExplorerState::open(shared.clone())
        } else {
            ExplorerState::with_allow_list(shared.clone(), config.explorer.tokens.clone())
        };
        let mut stop = stop_rx.clone();
        tokio::spawn(async move {
            let stopped = async move {
                let _ = stop.wait_for(|s| *s).await;
            };
            if let Err(e) = poa_explorer::serve(listener, state, stopped).await {
                tracing::error!(error = %e, "explorer stopped");
            }
        });
    }

    if let WitnessAdapter::File { path } = &config.anchoring.witness {
        let witness = FileWitness::open(path)?;
        let log = AnchorLog::open(config.anchor_log_file())?;
        let agent =
            AnchorAgent::resume(config.anchoring.policy, genesis.timestamp, anchors.clone());
        tokio::spawn(anchor_loop(
            agent,
            witness,
            log,
            shared.clone(),
            events_tx.clone(),
            stop_rx.clone(),
        ));
    }

    on_bound(Bound {
        gossip: gossip_addr,
        explorer: explorer_addr,
    });
    tracing::info!(
        address = ?key.as_ref().map(KeyPair::address),
        head = node.view().head_height(),
        %gossip_addr,
        "node started"
    );

    let mut peers: HashMap<PeerId, mpsc::UnboundedSender<GossipMessage>> = HashMap::new();
    let mut anchors = anchors;
    let mut dirty = false;
    let mut persist_tick = tokio::time::interval(PERSIST_EVERY);
    let chain_file = config.chain_file();
    let mut shutdown = std::pin::pin!(shutdown);

    let ctx = Ctx {
        events_tx: &events_tx,
    };
    ctx.dispatch(node.handle(Input::Start, now_ms()), &peers);

    loop {
        let ev = tokio::select! {
            ev = events.recv() => ev,
            _ = persist_tick.tick() => {
                if dirty {
                    persist_chain(&chain_file, &node)?;
                    dirty = false;
                }
                continue;
            }
            _ = &mut shutdown => break,
        };
        let Some(ev) = ev else { break };
        let head_before = node.view().head();
        match ev {
            Event::Connected { peer, outbox } => {
                // Announcing our head lets a lagging peer walk back to us.
                if node.view().head_height() > 0 {
                    let _ = outbox.send(GossipMessage::NewBlock(
                        (*node.view().head_block().block).clone(),
                    ));
                }
                peers.insert(peer, outbox);
            }
            Event::Disconnected(peer) => {
                peers.remove(&peer);
            }
            Event::Message { peer, msg } => {
                let outputs = node.handle(
                    Input::Message {
                        from: peer,
                        msg: *msg,
                    },
                    now_ms(),
                );
                ctx.dispatch(outputs, &peers);
            }
            Event::Timer(t) => {
                let outputs = node.handle(Input::Timer(t), now_ms());
                ctx.dispatch(outputs, &peers);
            }
            Event::Anchored(a) => {
                anchors.push(a);
                shared.publish(Snapshot::new(
                    node.view().clone(),
                    anchors.clone(),
                    Some(docstore.clone()),
                ));
            }
        }
        if node.view().head() != head_before {
            dirty = true;
            shared.publish(Snapshot::new(
                node.view().clone(),
                anchors.clone(),
                Some(docstore.clone()),
            ));
        }
    }

    let _ = stop_tx.send(true);
    persist_chain(&chain_file, &node)?;
    tracing::info!(
        head = node.view().head_height(),
        "chain persisted, node stopped"
    );
    Ok(())
}

struct Ctx<'a> {
    events_tx: &'a mpsc::UnboundedSender<Event>,
}

impl Ctx<'_> {
    fn dispatch(
        &self,
        outputs: Vec<Output>,
        peers: &HashMap<PeerId, mpsc::UnboundedSender<GossipMessage>>,
    ) {
        for o in outputs {
            match o {
                Output::Broadcast(msg) => {
                    for tx in peers.values() {
                        let _ = tx.send(msg.clone());
                    }
                }
                Output::Send { to, msg } => {
                    if let Some(tx) = peers.get(&to) {
                        let _ = tx.send(msg);
                    }
                }
                Output::SetTimer { at_ms, timer } => {
                    let delay = Duration::from_millis(at_ms.saturating_sub(now_ms()));
                    let events = self.events_tx.clone();
                    tokio::spawn(async move {
                        tokio::time::sleep(delay).await;
                        let _ = events.send(Event::Timer(timer));
                    });
                }
                Output::Event(e) => log_event(&e),
            }
        }
    }
}

fn log_event(e: &NodeEvent) {
    match e {
        NodeEvent::Produced {
            height,
            digest,
            weight,
            txs,
        } => {
            tracing::info!(height, %digest, weight, txs, "sealed block")
        }
        NodeEvent::HeadChanged {
            height,
            digest,
            reorg,
            ..
        } => {
            tracing::debug!(height, %digest, reorg, "head changed")
        }
        NodeEvent::BlockRejected {
            height,
            digest,
            reason,
        } => {
            tracing::warn!(height, %digest, %reason, "rejected block")
        }
        NodeEvent::Equivocation(ev) => {
            tracing::warn!(evidence = %json!(ev), "equivocation detected")
        }
        NodeEvent::TxRejected { digest, reason } => {
            tracing::info!(%digest, %reason, "rejected transaction")
        }
    }
}

async fn accept_loop(
    listener: TcpListener,
    events: mpsc::UnboundedSender<Event>,
    next_peer: Arc<AtomicU32>,
    mut stop: watch::Receiver<bool>,
) {
    loop {
        tokio::select! {
            res = listener.accept() => match res {
                Ok((stream, _)) => {
                    let id = next_peer.fetch_add(1, Ordering::Relaxed);
                    tokio::spawn(connection(stream, id, events.clone()));
                }
                Err(e) => tracing::warn!(error = %e, "accept failed"),
            },
            _ = stop.wait_for(|s| *s) => return,
        }
    }
}

async fn dial_loop(
    addr: SocketAddr,
    events: mpsc::UnboundedSender<Event>,
    next_peer: Arc<AtomicU32>,
    mut stop: watch::Receiver<bool>,
) {
    loop {
        let attempt = async {
            match TcpStream::connect(addr).await {
                Ok(stream) => {
                    tracing::debug!(%addr, "connected to peer");
                    let id = next_peer.fetch_add(1, Ordering::Relaxed);
                    connection(stream, id, events.clone()).await;
                }
                Err(e) => tracing::trace!(%addr, error = %e, "peer unreachable"),
            }
            tokio::time::sleep(REDIAL_AFTER).await;
        };
        tokio::select! {
            _ = attempt => {}
            _ = stop.wait_for(|s| *s) => return,
        }
    }
}

async fn connection(stream: TcpStream, peer: PeerId, events: mpsc::UnboundedSender<Event>) {
    let _ = stream.set_nodelay(true);
    let (mut reader, mut writer) = stream.into_split();
    let (outbox, mut rx) = mpsc::unbounded_channel::<GossipMessage>();
    if events.send(Event::Connected { peer, outbox }).is_err() {
        return;
    }
    let writer_task = tokio::spawn(async move {
        while let Some(msg) = rx.recv().await {
            if write_frame(&mut writer, &msg).await.is_err() {
                break;
            }
        }
    });
    loop {
        match read_frame(&mut reader).await {
            Ok(Some(msg)) => {
                if events
                    .send(Event::Message {
                        peer,
                        msg: Box::new(msg),
                    })
                    .is_err()
                {
                    break;
                }
            }
            Ok(None) => break,
            Err(e) => {
                tracing::debug!(peer, error = %e, "dropping peer");
                break;
            }
        }
    }
    writer_task.abort();
    let _ = events.send(Event::Disconnected(peer));
}

async fn anchor_loop(
    mut agent: AnchorAgent,
    mut witness: FileWitness,
    mut log: AnchorLog,
    shared: SharedSnapshot,
    events: mpsc::UnboundedSender<Event>,
    mut stop: watch::Receiver<bool>,
) {
    let mut tick = tokio::time::interval(ANCHOR_TICK);
    let mut gaps_seen = agent.gaps().len();
    loop {
        tokio::select! {
            _ = tick.tick() => {}
            _ = stop.wait_for(|s| *s) => return,
        }
        let snap = shared.load();
        let now_s = now_ms() / 1000;
        match agent.maybe_anchor(&snap.view, now_s, &mut witness as &mut dyn WitnessClient) {
            Ok(Some(anchor)) => {
                if let Err(e) = log.append(&anchor) {
                    tracing::error!(error = %e, "anchor log write failed");
                }
                let _ = events.send(Event::Anchored(anchor));
            }
            Ok(None) => {}
            Err(e) => tracing::warn!(error = %e, "anchoring failed"),
        }
        for gap in &agent.gaps()[gaps_seen..] {
            tracing::warn!(first_due = gap.first_due, missed = gap.missed, reason = %gap.reason, "anchor gap");
        }
        gaps_seen = agent.gaps().len();
    }
}
