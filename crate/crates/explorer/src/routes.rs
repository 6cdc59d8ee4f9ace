use std::sync::Arc;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use poa_core::anchoring::Anchor;
use poa_core::block::Block;
use poa_core::contracts::ContractManifest;
use poa_core::docstore::DocStoreError;
use poa_core::execution::{Receipt, ReceiptStatus};
use poa_core::export::encode_export;
use poa_core::{Address, Digest, Role, Transaction};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::snapshot::{Direction, SharedSnapshot, Snapshot};

pub const DEFAULT_PAGE_SIZE: usize = 10;
pub const MAX_PAGE_SIZE: usize = 100;

#[derive(Clone, Debug)]
pub struct ExplorerState {
    pub snapshot: SharedSnapshot,
    /// Bearer tokens allowed to read; `None` leaves the explorer open.
    pub allow_list: Option<Arc<Vec<String>>>,
}

impl ExplorerState {
    pub fn open(snapshot: SharedSnapshot) -> Self {
        Self {
            snapshot,
            allow_list: None,
        }
    }

    pub fn with_allow_list(snapshot: SharedSnapshot, tokens: Vec<String>) -> Self {
        Self {
            snapshot,
            allow_list: Some(Arc::new(tokens)),
        }
    }
}

/// All routes are GET; nothing here can change chain state.
pub fn router(state: ExplorerState) -> Router {
    Router::new()
        .route("/head", get(head))
        .route("/blocks/{id}", get(block))
        .route("/addresses/{addr}", get(address))
        .route("/contracts/{id}", get(contract))
        .route("/anchors", get(anchors))
        .route("/txs/{digest}", get(tx))
        .route("/documents/{digest}", get(document))
        .route("/export", get(export))
        .layer(middleware::from_fn_with_state(state.clone(), guard))
        .with_state(state)
}

async fn guard(State(state): State<ExplorerState>, req: Request, next: Next) -> Response {
    let snap = state.snapshot.load();
    if let Some(tokens) = &state.allow_list {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if !presented.is_some_and(|t| tokens.iter().any(|ok| ok == t)) {
            return ApiError::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "bearer token not on the allow-list",
            )
            .into_response(&snap);
        }
    }
    let mut resp = next.run(req).await;
    // Raw-byte responses carry the head height as a header; JSON carries it in the body too.
    if !resp.headers().contains_key("x-head-height") {
        resp.headers_mut()
            .insert("x-head-height", HeaderValue::from(snap.head_height()));
    }
    resp
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Option<serde_json::Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            extra: None,
        }
    }

    fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", what)
    }

    fn bad_request(what: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", what)
    }

    fn into_response(self, snap: &Snapshot) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message, "head_height": snap.head_height() });
        if let Some(extra) = self.extra {
            body["details"] = extra;
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn respond(snap: &Snapshot, result: ApiResult) -> Response {
    result.unwrap_or_else(|e| e.into_response(snap))
}

fn parse_digest(s: &str) -> Result<Digest, ApiError> {
    s.parse()
        .map_err(|_| ApiError::bad_request(format!("{s:?} is not a 64-character hex digest")))
}

fn parse_address(s: &str) -> Result<Address, ApiError> {
    s.parse()
        .map_err(|_| ApiError::bad_request(format!("{s:?} is not a 40-character hex address")))
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct HeadJson {
    pub head_height: u64,
    pub head: Digest,
    pub final_height: Option<u64>,
    pub finality_depth: u64,
    pub validators: Vec<Address>,
}

async fn head(State(state): State<ExplorerState>) -> Response {
    let snap = state.snapshot.load();
    let view = &snap.view;
    Json(HeadJson {
        head_height: view.head_height(),
        head: view.head(),
        final_height: view.final_height(),
        finality_depth: view.finality_depth(),
        validators: view.head_state().validators().members().to_vec(),
    })
    .into_response()
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct ReceiptSummary {
    pub tx: Digest,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
    pub gas_used: u64,
    pub events: usize,
}

impl From<&Receipt> for ReceiptSummary {
    fn from(r: &Receipt) -> Self {
        let (status, reason) = match &r.status {
            ReceiptStatus::Success => ("success".to_string(), None),
            ReceiptStatus::Reverted { reason } => ("reverted".to_string(), Some(reason.clone())),
        };
        Self {
            tx: r.tx,
            status,
            reason,
            gas_used: r.gas_used,
            events: r.events.len(),
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct BlockJson {
    pub head_height: u64,
    pub digest: Digest,
    pub height: u64,
    pub parent: Digest,
    pub state_root: Digest,
    pub tx_root: Digest,
    pub proposer: Address,
    pub timestamp: u64,
    pub weight: u8,
    pub in_turn: bool,
    pub confirmations: u64,
    #[serde(rename = "final")]
    pub is_final: bool,
    pub tx_digests: Vec<Digest>,
    pub receipts: Vec<ReceiptSummary>,
}

async fn block(State(state): State<ExplorerState>, Path(id): Path<String>) -> Response {
    let snap = state.snapshot.load();
    respond(&snap, block_inner(&snap, &id))
}

fn block_inner(snap: &Snapshot, id: &str) -> ApiResult {
    let view = &snap.view;
    let stored = if id == "latest" {
        view.head_block()
    } else if let Ok(h) = id.parse::<u64>() {
        view.canonical_at(h)
            .ok_or_else(|| ApiError::not_found(format!("no block at height {h}")))?
    } else {
        let d = parse_digest(id)?;
        let b = view
            .get(&d)
            .ok_or_else(|| ApiError::not_found(format!("unknown block {d}")))?;
        if !view.is_canonical(&d) {
            let tips = view.tips();
            let mut err = ApiError::new(
                StatusCode::CONFLICT,
                "not_canonical",
                format!("block {d} is not on the canonical chain"),
            );
            err.extra = Some(json!({ "height": b.height(), "head": view.head(), "tips": tips }));
            return Err(err);
        }
        b
    };
    let header = &stored.block.header;
    let head_height = view.head_height();
    let body = BlockJson {
        head_height,
        digest: stored.digest,
        height: header.height,
        parent: header.parent,
        state_root: header.state_root,
        tx_root: header.tx_root,
        proposer: header.proposer,
        timestamp: header.timestamp,
        weight: header.weight,
        in_turn: header.is_in_turn(),
        confirmations: head_height - header.height,
        is_final: view.is_final(&stored.digest),
        tx_digests: stored.block.tx_digests(),
        receipts: stored.receipts.iter().map(ReceiptSummary::from).collect(),
    };
    Ok(Json(body).into_response())
}

#[derive(Deserialize, Debug, Default)]
pub struct PageQuery {
    pub page: Option<usize>,
    pub page_size: Option<usize>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct HistoryItem {
    pub tx: Digest,
    pub height: u64,
    pub index: usize,
    pub direction: String,
    pub kind: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct AccountJson {
    pub head_height: u64,
    pub address: Address,
    pub balance: String,
    pub nonce: u64,
    pub role: Role,
    pub page: usize,
    pub page_size: usize,
    pub total_txs: usize,
    pub txs: Vec<HistoryItem>,
}

async fn address(
    State(state): State<ExplorerState>,
    Path(addr): Path<String>,
    Query(q): Query<PageQuery>,
) -> Response {
    let snap = state.snapshot.load();
    respond(&snap, address_inner(&snap, &addr, q))
}

fn address_inner(snap: &Snapshot, addr: &str, q: PageQuery) -> ApiResult {
    let addr = parse_address(addr)?;
    let page = q.page.unwrap_or(0);
    let page_size = q.page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if page_size == 0 || page_size > MAX_PAGE_SIZE {
        return Err(ApiError::bad_request(format!(
            "page_size must be between 1 and {MAX_PAGE_SIZE}"
        )));
    }
    let account = snap.view.head_state().account(&addr);
    let history = snap.history(&addr);
    let txs = history
        .iter()
        .skip(page.saturating_mul(page_size))
        .take(page_size)
        .map(|(loc, dir)| {
            let tx = &snap
                .view
                .canonical_at(loc.height)
                .expect("indexed height")
                .block
                .txs[loc.index];
            HistoryItem {
                tx: tx.digest(),
                height: loc.height,
                index: loc.index,
                direction: match dir {
                    Direction::Sent => "sent",
                    Direction::Received => "received",
                }
                .to_string(),
                kind: tx.kind.name().to_string(),
            }
        })
        .collect();
    Ok(Json(AccountJson {
        head_height: snap.head_height(),
        address: addr,
        balance: account.balance.to_string(),
        nonce: account.nonce,
        role: account.role,
        page,
        page_size,
        total_txs: history.len(),
        txs,
    })
    .into_response())
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct ContractJson {
    pub head_height: u64,
    pub manifest: ContractManifest,
    pub manifest_digest: Digest,
    pub storage_entries: usize,
}

async fn contract(State(state): State<ExplorerState>, Path(id): Path<String>) -> Response {
    let snap = state.snapshot.load();
    let result = (|| {
        let id = parse_address(&id)?;
        let c = snap
            .view
            .head_state()
            .contract(&id)
            .ok_or_else(|| ApiError::not_found(format!("no contract {id}")))?;
        Ok(Json(ContractJson {
            head_height: snap.head_height(),
            manifest: c.manifest.clone(),
            manifest_digest: c.manifest.digest(),
            storage_entries: c.storage.len(),
        })
        .into_response())
    })();
    respond(&snap, result)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct AnchorsJson {
    pub head_height: u64,
    pub anchors: Vec<Anchor>,
}

async fn anchors(State(state): State<ExplorerState>) -> Response {
    let snap = state.snapshot.load();
    Json(AnchorsJson {
        head_height: snap.head_height(),
        anchors: snap.anchors.clone(),
    })
    .into_response()
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct TxJson {
    pub head_height: u64,
    pub digest: Digest,
    pub block_height: u64,
    pub block_digest: Digest,
    pub index: usize,
    pub tx: Transaction,
    pub receipt: Receipt,
}

async fn tx(State(state): State<ExplorerState>, Path(digest): Path<String>) -> Response {
    let snap = state.snapshot.load();
    let result = (|| {
        let d = parse_digest(&digest)?;
        let loc = snap
            .locate_tx(&d)
            .ok_or_else(|| ApiError::not_found(format!("unknown transaction {d}")))?;
        let stored = snap.view.canonical_at(loc.height).expect("indexed height");
        Ok(Json(TxJson {
            head_height: snap.head_height(),
            digest: d,
            block_height: loc.height,
            block_digest: stored.digest,
            index: loc.index,
            tx: stored.block.txs[loc.index].clone(),
            receipt: stored.receipts[loc.index].clone(),
        })
        .into_response())
    })();
    respond(&snap, result)
}

async fn document(State(state): State<ExplorerState>, Path(digest): Path<String>) -> Response {
    let snap = state.snapshot.load();
    let result = (|| {
        let d = parse_digest(&digest)?;
        let store = snap
            .docstore
            .as_ref()
            .ok_or_else(|| ApiError::not_found("this node does not serve documents"))?;
        let bytes = store
            .fetch_and_verify(snap.view.head_state(), &d)
            .map_err(|e| {
                let status = match e {
                    DocStoreError::NotRegistered(_) | DocStoreError::LinkUnresolvable(_) => {
                        StatusCode::NOT_FOUND
                    }
                    DocStoreError::IntegrityMismatch { .. } => StatusCode::CONFLICT,
                    DocStoreError::TooLarge { .. } | DocStoreError::StorageFailure { .. } => {
                        StatusCode::INTERNAL_SERVER_ERROR
                    }
                };
                ApiError::new(status, e.code(), e.to_string())
            })?;
        Ok(([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
    })();
    respond(&snap, result)
}

#[derive(Deserialize, Debug, Default)]
pub struct ExportQuery {
    pub from: Option<u64>,
}

async fn export(State(state): State<ExplorerState>, Query(q): Query<ExportQuery>) -> Response {
    let snap = state.snapshot.load();
    let from = q.from.unwrap_or(0) as usize;
    let blocks: Vec<&Block> = snap
        .view
        .canonical()
        .iter()
        .skip(from)
        .map(|d| snap.view.get(d).expect("canonical").block.as_ref())
        .collect();
    let bytes = encode_export(blocks);
    ([(header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response()
}
