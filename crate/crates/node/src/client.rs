//! Operator-side helpers: read chain state through a node's explorer and
//! hand signed transactions to its gossip port.

use std::io::Read;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

use poa_core::consensus::scheduled_proposer;
use poa_core::execution::{apply_transaction, BlockContext, Receipt, ReceiptStatus};
use poa_core::export::decode_export;
use poa_core::genesis::Genesis;
use poa_core::gossip::GossipMessage;
use poa_core::state::WorldState;
use poa_core::validation::replay_chain;
use poa_core::{Block, Digest, Transaction};
use serde_json::Value;

use crate::error::CliError;
use crate::net::send_once;
use crate::runtime::now_ms;

const POLL_EVERY: Duration = Duration::from_millis(250);

fn unreachable(endpoint: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Unreachable {
        endpoint: endpoint.to_string(),
        message: e.to_string(),
    }
}

pub fn fetch_export(explorer: &str, from: u64) -> Result<Vec<u8>, CliError> {
    let url = format!("{}/export?from={from}", explorer.trim_end_matches('/'));
    let resp = ureq::get(&url).call().map_err(|e| unreachable(&url, e))?;
    let mut bytes = Vec::new();
    resp.into_reader()
        .read_to_end(&mut bytes)
        .map_err(|e| unreachable(&url, e))?;
    Ok(bytes)
}

/// `Ok(None)` on 404.
pub fn get_json(explorer: &str, path: &str) -> Result<Option<Value>, CliError> {
    let url = format!("{}{path}", explorer.trim_end_matches('/'));
    match ureq::get(&url).call() {
        Ok(resp) => resp.into_json().map(Some).map_err(|e| unreachable(&url, e)),
        Err(ureq::Error::Status(404, _)) => Ok(None),
        Err(e) => Err(unreachable(&url, e)),
    }
}

/// Head state of the node's canonical chain, replayed and checked locally.
pub fn head_state(explorer: &str, genesis: &Genesis) -> Result<(Vec<Block>, WorldState), CliError> {
    let blocks = decode_export(&fetch_export(explorer, 0)?)?;
    let (report, state) = replay_chain(&blocks, genesis);
    if !report.is_ok() {
        return Err(CliError::ChainInvalid {
            report: Box::new(report),
        });
    }
    Ok((blocks, state))
}

/// Applies `tx` to a copy of `state` as if it were sealed in the next block.
pub fn precheck(
    state: &WorldState,
    head_height: u64,
    tx: &Transaction,
) -> Result<Receipt, CliError> {
    let height = head_height + 1;
    let proposer = scheduled_proposer(height, state.validators());
    let ctx = BlockContext::new(state, height, now_ms() / 1000, proposer);
    let receipt = apply_transaction(&mut state.clone(), tx, &ctx).map_err(CliError::Tx)?;
    if let ReceiptStatus::Reverted { reason } = &receipt.status {
        return Err(CliError::Reverted {
            digest: tx.digest().to_string(),
            reason: reason.clone(),
        });
    }
    Ok(receipt)
}

pub fn submit(peer: SocketAddr, tx: &Transaction) -> Result<(), CliError> {
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(CliError::io("runtime"))?;
    rt.block_on(send_once(peer, &GossipMessage::NewTx(tx.clone())))
        .map_err(|e| unreachable(&peer.to_string(), e))
}

/// Polls the explorer until `digest` is on the canonical chain.
pub fn wait_for_inclusion(
    explorer: &str,
    digest: &Digest,
    seconds: u64,
) -> Result<Value, CliError> {
    let deadline = Instant::now() + Duration::from_secs(seconds);
    loop {
        if let Some(v) = get_json(explorer, &format!("/txs/{digest}"))? {
            if v["receipt"]["status"] == "reverted" {
                let reason = v["receipt"]["reason"]
                    .as_str()
                    .unwrap_or_default()
                    .to_string();
                return Err(CliError::Reverted {
                    digest: digest.to_string(),
                    reason,
                });
            }
            return Ok(v);
        }
        if Instant::now() >= deadline {
            return Err(CliError::NotIncluded {
                digest: digest.to_string(),
                seconds,
            });
        }
        std::thread::sleep(POLL_EVERY);
    }
}
