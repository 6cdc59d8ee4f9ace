use std::io::{IsTerminal, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use poa_core::anchoring::{load_witness_dump, verify_against_anchors};
use poa_core::consensus::ConsensusConfig;
use poa_core::docstore::{register_on_chain, registration_gas, DocStore};
use poa_core::export::{decode_export, read_export};
use poa_core::genesis::{Allocation, Genesis};
use poa_core::validation::validate_chain;
use poa_core::{Address, KeyPair, Transaction, TxKind};
use poa_node::client;
use poa_node::error::CliError;
use poa_node::keyfile::{self, read_key};
use poa_node::runtime::{self, now_ms};
use poa_node::testnet::{self, write_json, TestnetSpec};
use poa_node::NodeConfig;
use poa_simnet::SimConfig;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "poa",
    version,
    about = "Permissioned proof-of-authority ledger node and tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair and print its address.
    Keygen {
        /// Key file to create; must not exist.
        #[arg(long)]
        out: PathBuf,
    },
    /// Genesis file tools.
    #[command(subcommand)]
    Genesis(GenesisCmd),
    /// Run a node.
    #[command(subcommand)]
    Node(NodeCmd),
    /// Node config tools.
    #[command(subcommand)]
    Config(ConfigCmd),
    /// Transactions.
    #[command(subcommand)]
    Tx(TxCmd),
    /// Endow an operator with LOCETH (validator key required).
    Faucet {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        to: Address,
        #[arg(long)]
        amount: u128,
        #[command(flatten)]
        target: Target,
    },
    /// Document notarization.
    #[command(subcommand)]
    Doc(DocCmd),
    /// Anchor checks.
    #[command(subcommand)]
    Anchor(AnchorCmd),
    /// Chain export.
    #[command(subcommand)]
    Chain(ChainCmd),
    /// Deterministic network simulation.
    #[command(subcommand)]
    Simnet(SimnetCmd),
    /// Local multi-process network scaffolding.
    #[command(subcommand)]
    Testnet(TestnetCmd),
}

#[derive(Subcommand)]
enum GenesisCmd {
    /// Write a genesis file.
    New {
        /// Validator address; repeat for each validator.
        #[arg(long = "validator")]
        validators: Vec<Address>,
        /// Validator key file; its address is added to the validators.
        #[arg(long = "validator-key")]
        validator_keys: Vec<PathBuf>,
        /// Initial balance as ADDRESS=AMOUNT; repeatable.
        #[arg(long = "alloc", value_parser = parse_alloc)]
        allocations: Vec<Allocation>,
        /// Unix seconds; defaults to now.
        #[arg(long)]
        timestamp: Option<u64>,
        #[arg(long, default_value_t = ConsensusConfig::default().slot_seconds)]
        slot_seconds: u64,
        #[arg(long, default_value_t = ConsensusConfig::default().out_of_turn_delay)]
        out_of_turn_delay: u64,
        #[arg(long, default_value_t = ConsensusConfig::default().block_capacity)]
        block_capacity: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum NodeCmd {
    /// Run consensus, gossip, explorer and anchoring until interrupted.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Load, validate and print a node config.
    Print {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Where to read chain state and where to deliver transactions.
#[derive(Args)]
struct Target {
    /// Genesis file of the chain.
    #[arg(long)]
    genesis: PathBuf,
    /// Explorer base URL of a node.
    #[arg(long, default_value = "http://127.0.0.1:30400")]
    explorer: String,
    /// Gossip address of the same node.
    #[arg(long, default_value = "127.0.0.1:30300")]
    peer: SocketAddr,
    /// Override the sender nonce.
    #[arg(long)]
    nonce: Option<u64>,
    /// Seconds to wait for inclusion; 0 returns after submission.
    #[arg(long, default_value_t = 0)]
    wait: u64,
}

#[derive(Subcommand)]
enum TxCmd {
    /// Transfer LOCETH.
    Send {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        to: Address,
        #[arg(long)]
        amount: u128,
        /// Defaults to the intrinsic cost.
        #[arg(long)]
        gas_limit: Option<u64>,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Subcommand)]
enum DocCmd {
    /// Store a file in the document store and register its digest on chain.
    Register {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        file: PathBuf,
        /// Document store directory served by the node.
        #[arg(long)]
        docstore: PathBuf,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Subcommand)]
enum AnchorCmd {
    /// Compare a chain export with a witness dump.
    Verify {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        witness: PathBuf,
        /// Also replay the chain from this genesis.
        #[arg(long)]
        genesis: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChainCmd {
    /// Download the canonical chain from a node's explorer.
    Export {
        #[arg(long, default_value = "http://127.0.0.1:30400")]
        explorer: String,
        #[arg(long, default_value_t = 0)]
        from: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimnetCmd {
    /// Run a simulation and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Virtual seconds.
        #[arg(long)]
        duration: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum TestnetCmd {
    /// Write genesis, keys and configs for N local validators.
    Init {
        #[arg(long, default_value_t = 7)]
        validators: usize,
        #[arg(long)]
        dir: PathBuf,
        /// Gossip ports start here; explorer ports start 100 higher.
        #[arg(long, default_value_t = 30300)]
        base_port: u16,
        #[arg(long, default_value_t = ConsensusConfig::default().slot_seconds)]
        slot_seconds: u64,
        #[arg(long, default_value_t = ConsensusConfig::default().out_of_turn_delay)]
        out_of_turn_delay: u64,
        #[arg(long, default_value_t = 60)]
        anchor_interval: u64,
    },
}

fn parse_alloc(s: &str) -> Result<Allocation, String> {
    let (addr, amount) = s.split_once('=').ok_or("expected ADDRESS=AMOUNT")?;
    Ok(Allocation {
        address: addr.parse().map_err(|e| format!("{e}"))?,
        amount: amount.parse().map_err(|e| format!("{e}"))?,
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.render().to_string();
            let _ = writeln!(
                std::io::stderr(),
                "{}",
                json!({ "error": "UsageError", "message": msg.trim() })
            );
            return ExitCode::from(2);
        }
    };
    match dispatch(cli.command) {
        Ok(Some(v)) => {
            // A closed pipe on stdout is not worth a panic.
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&v).expect("output serializes")
            );
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<Option<Value>, CliError> {
    match cmd {
        Command::Keygen { out } => {
            let key = keyfile::generate(&out)?;
            Ok(Some(json!({ "address": key.address(), "key_file": out })))
        }
        Command::Genesis(GenesisCmd::New {
            mut validators,
            validator_keys,
            allocations,
            timestamp,
            slot_seconds,
            out_of_turn_delay,
            block_capacity,
            out,
        }) => {
            for k in &validator_keys {
                validators.push(read_key(k)?.address());
            }
            let consensus = ConsensusConfig {
                slot_seconds,
                out_of_turn_delay,
                block_capacity,
                ..Default::default()
            };
            let genesis = Genesis {
                allocations,
                consensus,
                ..Genesis::new(validators, timestamp.unwrap_or(now_ms() / 1000))
            };
            genesis.validate().map_err(|source| CliError::Genesis {
                path: out.clone(),
                source,
            })?;
            write_json(&out, &genesis)?;
            Ok(Some(
                json!({ "genesis": out, "digest": genesis.block().digest() }),
            ))
        }
        Command::Node(NodeCmd::Run { config }) => run_node(&config).map(|_| None),
        Command::Config(ConfigCmd::Print { config }) => {
            let cfg = NodeConfig::load(&config)?;
            Ok(Some(serde_json::to_value(cfg).expect("config serializes")))
        }
        Command::Tx(TxCmd::Send {
            key,
            to,
            amount,
            gas_limit,
            target,
        }) => {
            let key = read_key(&key)?;
            send(&key, TxKind::Transfer { to, amount }, gas_limit, &target)
        }
        Command::Faucet {
            key,
            to,
            amount,
            target,
        } => {
            let key = read_key(&key)?;
            send(
                &key,
                TxKind::Endow {
                    operator: to,
                    amount,
                },
                None,
                &target,
            )
        }
        Command::Doc(DocCmd::Register {
            key,
            file,
            docstore,
            target,
        }) => {
            let key = read_key(&key)?;
            let bytes = std::fs::read(&file).map_err(CliError::io(&file))?;
            let store = DocStore::open(&docstore)?;
            let doc = store.store_document(&bytes)?;
            let genesis = load_genesis(&target.genesis)?;
            let gas = registration_gas(&doc, &genesis.gas_schedule);
            let kind = register_on_chain(&doc, &key, 0, gas).kind;
            let mut out = send(&key, kind, Some(gas), &target)?.expect("send reports");
            out["document"] = serde_json::to_value(&doc).expect("document serializes");
            Ok(Some(out))
        }
        Command::Anchor(AnchorCmd::Verify {
            chain,
            witness,
            genesis,
        }) => {
            let file = std::fs::File::open(&chain).map_err(CliError::io(&chain))?;
            let blocks = read_export(std::io::BufReader::new(file))?;
            let records = load_witness_dump(&witness)?;
            let structure = match genesis {
                Some(g) => {
                    let report = validate_chain(&blocks, &load_genesis(&g)?);
                    if !report.is_ok() {
                        return Err(CliError::ChainInvalid {
                            report: Box::new(report),
                        });
                    }
                    Some(report)
                }
                None => None,
            };
            let report = verify_against_anchors(&blocks, &records);
            if !report.is_ok() {
                return Err(CliError::AnchorMismatch {
                    report: Box::new(report),
                });
            }
            Ok(Some(
                json!({ "ok": true, "blocks": blocks.len(), "structure": structure, "anchors": report }),
            ))
        }
        Command::Chain(ChainCmd::Export {
            explorer,
            from,
            out,
        }) => {
            let bytes = client::fetch_export(&explorer, from)?;
            let blocks = decode_export(&bytes)?;
            std::fs::write(&out, &bytes).map_err(CliError::io(&out))?;
            Ok(Some(
                json!({ "out": out, "blocks": blocks.len(), "from": from }),
            ))
        }
        Command::Simnet(SimnetCmd::Run {
            config,
            duration,
            out,
        }) => {
            let bytes = std::fs::read(&config).map_err(CliError::io(&config))?;
            let cfg: SimConfig = serde_json::from_slice(&bytes).map_err(|e| CliError::Config {
                path: config.clone(),
                message: e.to_string(),
            })?;
            let trace =
                poa_simnet::run(cfg, duration).map_err(|e| CliError::Simulation(e.to_string()))?;
            std::fs::write(&out, trace.to_json()).map_err(CliError::io(&out))?;
            Ok(Some(json!({ "out": out, "metrics": trace.metrics })))
        }
        Command::Testnet(TestnetCmd::Init {
            validators,
            dir,
            base_port,
            slot_seconds,
            out_of_turn_delay,
            anchor_interval,
        }) => {
            let mut spec = TestnetSpec::new(validators, base_port, now_ms() / 1000);
            spec.consensus.slot_seconds = slot_seconds;
            spec.consensus.out_of_turn_delay = out_of_turn_delay;
            spec.anchor_interval_seconds = anchor_interval;
            let layout = testnet::init(&dir, &spec)?;
            Ok(Some(
                serde_json::to_value(layout).expect("layout serializes"),
            ))
        }
    }
}

fn load_genesis(path: &Path) -> Result<Genesis, CliError> {
    Genesis::load(path).map_err(|source| CliError::Genesis {
        path: path.to_owned(),
        source,
    })
}

/// Signs `kind`, checks it against the node's head state, then submits it.
fn send(
    key: &KeyPair,
    kind: TxKind,
    gas_limit: Option<u64>,
    target: &Target,
) -> Result<Option<Value>, CliError> {
    let genesis = load_genesis(&target.genesis)?;
    let (blocks, state) = client::head_state(&target.explorer, &genesis)?;
    let head_height = blocks.len() as u64 - 1;
    let nonce = target
        .nonce
        .unwrap_or_else(|| state.account(&key.address()).nonce);
    let gas_limit = gas_limit.unwrap_or_else(|| {
        state
            .gas_schedule()
            .intrinsic_gas(&Transaction::signed(key, nonce, 0, kind.clone()))
    });
    let tx = Transaction::signed(key, nonce, gas_limit, kind);
    let receipt = client::precheck(&state, head_height, &tx)?;
    client::submit(target.peer, &tx)?;
    let digest = tx.digest();
    let mut out = json!({
        "tx": digest,
        "sender": tx.sender,
        "nonce": nonce,
        "gas_limit": gas_limit,
        "expected_gas_used": receipt.gas_used,
        "status": "submitted",
    });
    if target.wait > 0 {
        let included = client::wait_for_inclusion(&target.explorer, &digest, target.wait)?;
        out["status"] = json!("included");
        out["block_height"] = included["block_height"].clone();
        out["receipt"] = included["receipt"].clone();
    }
    Ok(Some(out))
}

fn run_node(config_path: &Path) -> Result<(), CliError> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let cfg = NodeConfig::load(config_path)?;
    let base = config_path.parent().map(Path::to_owned).unwrap_or_default();
    let prepared = runtime::prepare(cfg.resolved(&base))?;
    let rt = tokio::runtime::Runtime::new().map_err(CliError::io("runtime"))?;
    rt.block_on(runtime::run(prepared, shutdown_signal(), |bound| {
        let line =
            json!({ "event": "started", "gossip": bound.gossip, "explorer": bound.explorer });
        let mut out = std::io::stdout();
        let _ = writeln!(out, "{line}").and_then(|_| out.flush());
    }))
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        let mut term = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
            .expect("install SIGTERM handler");
        tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}
