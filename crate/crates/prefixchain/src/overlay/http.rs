//! HTTP transport: the daemon's REST surface and the matching client.
//!
//! Bodies are canonical-encoding JSON. The wire endpoints:
//!
//! - `GET  /identity`      -> signed identity record
//! - `POST /peers/register` <- signed identity record -> 200 | 409
//! - `GET  /peers`         -> list of peers
//! - `GET  /ping`          -> 200 with {head_index, head_hash}
//! - `POST /transactions`  <- transaction -> 202 | 422 with rejection reason
//! - `POST /blocks/notify` <- {index, hash, miner, signature} -> 200
//! - `GET  /chain`         -> full chain document
//!
//! Read-only extras serving the inspect tooling:
//! `GET /log`, `GET /state/ip`, `GET /state/graphs`, `GET /state/graph?prefix=`.

use std::net::SocketAddr;
use std::sync::atomic::Ordering;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{BlockNotify, HeadInfo, PeerClient, PeerInfo, SignedIdentity, TransportError};
use crate::ledger::{Chain, Transaction};
use crate::node::{NodeEngine, NotifyDecision, RegisterError};
use crate::verdict::InvalidReason;

/// Wall-clock seconds; the daemon's time source.
pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .expect("system clock before epoch")
        .as_secs()
}

/// Shared daemon state: the engine behind a mutex plus an outbound client.
#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Mutex<NodeEngine>>,
}

#[derive(Serialize, Deserialize)]
pub struct RejectionBody {
    pub reason: InvalidReason,
    pub detail: String,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/identity", get(get_identity))
        .route("/peers/register", post(post_register))
        .route("/peers", get(get_peers))
        .route("/ping", get(get_ping))
        .route("/transactions", post(post_transaction))
        .route("/blocks/notify", post(post_notify))
        .route("/chain", get(get_chain))
        .route("/log", get(get_log))
        .route("/state/ip", get(get_ip_state))
        .route("/state/graphs", get(get_graphs))
        .route("/state/graph", get(get_graph))
        .with_state(state)
}

fn lock(state: &AppState) -> std::sync::MutexGuard<'_, NodeEngine> {
    state.engine.lock().expect("engine mutex poisoned")
}

async fn get_identity(State(state): State<AppState>) -> Json<SignedIdentity> {
    Json(lock(&state).identity_record())
}

async fn post_register(
    State(state): State<AppState>,
    Json(record): Json<SignedIdentity>,
) -> Result<StatusCode, (StatusCode, String)> {
    match lock(&state).handle_register(&record, unix_now()) {
        Ok(()) => Ok(StatusCode::OK),
        Err(RegisterError::KeyConflict(e)) => Err((StatusCode::CONFLICT, e.to_string())),
        Err(e) => Err((StatusCode::BAD_REQUEST, e.to_string())),
    }
}

async fn get_peers(State(state): State<AppState>) -> Json<Vec<PeerInfo>> {
    Json(lock(&state).peers().all().cloned().collect())
}

async fn get_ping(State(state): State<AppState>) -> Json<HeadInfo> {
    Json(lock(&state).head_info())
}

async fn post_transaction(
    State(state): State<AppState>,
    Json(tx): Json<Transaction>,
) -> Result<StatusCode, (StatusCode, Json<RejectionBody>)> {
    match lock(&state).submit_transaction(tx, unix_now()) {
        Ok(()) => Ok(StatusCode::ACCEPTED),
        Err(reason) => Err((
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(RejectionBody {
                reason,
                detail: reason.to_string(),
            }),
        )),
    }
}

async fn post_notify(State(state): State<AppState>, Json(notify): Json<BlockNotify>) -> StatusCode {
    let (decision, peer_endpoint) = {
        let engine = lock(&state);
        let decision = engine.handle_notify(&notify);
        let endpoint = engine.peers().get(notify.miner).map(|p| p.endpoint());
        (decision, endpoint)
    };
    if decision == NotifyDecision::Fetch {
        if let Some(endpoint) = peer_endpoint {
            let engine = Arc::clone(&state.engine);
            // Fetch outside any lock; adoption re-locks briefly.
            tokio::task::spawn_blocking(move || {
                let client = HttpPeerClient::new();
                match client.fetch_chain(&endpoint) {
                    Ok(chain) => {
                        let mut engine = engine.lock().expect("engine mutex poisoned");
                        match engine.offer_chain(chain, unix_now()) {
                            Ok(resolution) => log::info!("chain fetch from {endpoint}: {resolution:?}"),
                            Err(err) => log::warn!("fetched chain rejected: {err}"),
                        }
                    }
                    Err(err) => log::warn!("chain fetch from {endpoint} failed: {err}"),
                }
            });
        }
    }
    StatusCode::OK
}

async fn get_chain(State(state): State<AppState>) -> Json<Chain> {
    Json(lock(&state).chain().clone())
}

async fn get_log(State(state): State<AppState>) -> Json<Vec<crate::mempool::InvalidTxRecord>> {
    Json(lock(&state).invalid_log().to_vec())
}

async fn get_ip_state(State(state): State<AppState>) -> String {
    lock(&state).dump_ip_state()
}

async fn get_graphs(State(state): State<AppState>) -> String {
    lock(&state).dump_graphs()
}

#[derive(Deserialize)]
struct GraphQuery {
    prefix: String,
}

async fn get_graph(
    State(state): State<AppState>,
    Query(query): Query<GraphQuery>,
) -> Result<String, (StatusCode, String)> {
    let prefix: crate::ledger::Prefix = query
        .prefix
        .parse()
        .map_err(|e| (StatusCode::BAD_REQUEST, format!("{e}")))?;
    let engine = lock(&state);
    match engine.states().bgp.graph(prefix) {
        Some(graph) => Ok(graph.to_dot()),
        None => Err((
            StatusCode::NOT_FOUND,
            format!("no graph for prefix {prefix}"),
        )),
    }
}

/// Blocking HTTP client for node-to-node and CLI-to-node calls.
pub struct HttpPeerClient {
    client: reqwest::blocking::Client,
}

impl Default for HttpPeerClient {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpPeerClient {
    pub fn new() -> Self {
        HttpPeerClient {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(5))
                .build()
                .expect("reqwest client builds"),
        }
    }

    fn url(endpoint: &str, path: &str) -> String {
        if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            format!("{endpoint}{path}")
        } else {
            format!("http://{endpoint}{path}")
        }
    }

    fn get_json<T: serde::de::DeserializeOwned>(
        &self,
        endpoint: &str,
        path: &str,
    ) -> Result<T, TransportError> {
        let resp = self
            .client
            .get(Self::url(endpoint, path))
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(TransportError::Protocol(format!(
                "{path} -> {}",
                resp.status()
            )));
        }
        resp.json()
            .map_err(|e| TransportError::Protocol(e.to_string()))
    }

    /// Raw GET returning the body text; used by the inspect tooling.
    pub fn get_text(&self, endpoint: &str, path: &str) -> Result<String, TransportError> {
        let resp = self
            .client
            .get(Self::url(endpoint, path))
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| TransportError::Protocol(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Protocol(format!("{path} -> {status}: {text}")));
        }
        Ok(text)
    }

    pub fn get_graph_dot(&self, endpoint: &str, prefix: &str) -> Result<String, TransportError> {
        let url = Self::url(endpoint, "/state/graph");
        let resp = self
            .client
            .get(url)
            .query(&[("prefix", prefix)])
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| TransportError::Protocol(e.to_string()))?;
        if !status.is_success() {
            return Err(TransportError::Protocol(format!(
                "/state/graph -> {status}: {text}"
            )));
        }
        Ok(text)
    }
}

impl PeerClient for HttpPeerClient {
    fn identity(&self, endpoint: &str) -> Result<SignedIdentity, TransportError> {
        self.get_json(endpoint, "/identity")
    }

    fn register(&self, endpoint: &str, record: &SignedIdentity) -> Result<(), TransportError> {
        let resp = self
            .client
            .post(Self::url(endpoint, "/peers/register"))
            .json(record)
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        match resp.status() {
            s if s.is_success() => Ok(()),
            StatusCode::CONFLICT => Err(TransportError::KeyConflict),
            s => Err(TransportError::Protocol(format!("/peers/register -> {s}"))),
        }
    }

    fn peers(&self, endpoint: &str) -> Result<Vec<PeerInfo>, TransportError> {
        self.get_json(endpoint, "/peers")
    }

    fn ping(&self, endpoint: &str) -> Result<HeadInfo, TransportError> {
        self.get_json(endpoint, "/ping")
    }

    fn post_transaction(
        &self,
        endpoint: &str,
        tx: &Transaction,
    ) -> Result<Result<(), InvalidReason>, TransportError> {
        let resp = self
            .client
            .post(Self::url(endpoint, "/transactions"))
            .json(tx)
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        match resp.status() {
            s if s.is_success() => Ok(Ok(())),
            StatusCode::UNPROCESSABLE_ENTITY => {
                let body: RejectionBody = resp
                    .json()
                    .map_err(|e| TransportError::Protocol(e.to_string()))?;
                Ok(Err(body.reason))
            }
            s => Err(TransportError::Protocol(format!("/transactions -> {s}"))),
        }
    }

    fn notify_block(&self, endpoint: &str, notify: &BlockNotify) -> Result<(), TransportError> {
        let resp = self
            .client
            .post(Self::url(endpoint, "/blocks/notify"))
            .json(notify)
            .send()
            .map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if resp.status().is_success() {
            Ok(())
        } else {
            Err(TransportError::Protocol(format!(
                "/blocks/notify -> {}",
                resp.status()
            )))
        }
    }

    fn fetch_chain(&self, endpoint: &str) -> Result<Chain, TransportError> {
        self.get_json(endpoint, "/chain")
    }
}

/// Broadcasts a transaction to every alive peer, best effort.
pub fn broadcast_tx<C: PeerClient>(client: &C, peers: &[PeerInfo], tx: &Transaction) -> usize {
    let mut delivered = 0;
    for peer in peers {
        match client.post_transaction(&peer.endpoint(), tx) {
            Ok(_) => delivered += 1,
            Err(err) => log::debug!("tx broadcast to {} failed: {err}", peer.asn),
        }
    }
    delivered
}

/// Notifies every alive peer of a freshly mined block, best effort.
pub fn notify_peers<C: PeerClient>(client: &C, peers: &[PeerInfo], notify: &BlockNotify) -> usize {
    let mut delivered = 0;
    for peer in peers {
        match client.notify_block(&peer.endpoint(), notify) {
            Ok(()) => delivered += 1,
            Err(err) => log::debug!("block notify to {} failed: {err}", peer.asn),
        }
    }
    delivered
}

/// Runs the daemon: binds the listener, joins via the bootstrap list, then
/// serves until interrupted, with keepalive and optional mining loops.
pub fn run_daemon(
    engine: NodeEngine,
    listen: SocketAddr,
    bootstrap: Vec<String>,
) -> Result<(), Box<dyn std::error::Error>> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(run_daemon_inner(engine, listen, bootstrap))
}

async fn run_daemon_inner(
    engine: NodeEngine,
    listen: SocketAddr,
    bootstrap: Vec<String>,
) -> Result<(), Box<dyn std::error::Error>> {
    let state = AppState {
        engine: Arc::new(Mutex::new(engine)),
    };
    let listener = tokio::net::TcpListener::bind(listen).await?;
    log::info!("listening on {listen}");

    // Join after binding so bootstrap peers can immediately call back.
    if !bootstrap.is_empty() {
        let engine = Arc::clone(&state.engine);
        tokio::task::spawn_blocking(move || {
            let client = HttpPeerClient::new();
            let record = engine
                .lock()
                .expect("engine mutex poisoned")
                .identity_record();
            match super::join(&client, &bootstrap, &record) {
                Ok(identities) => {
                    let mut engine = engine.lock().expect("engine mutex poisoned");
                    for identity in identities {
                        if let Err(err) = engine.handle_register(&identity, unix_now()) {
                            log::warn!("discovered identity rejected: {err}");
                        }
                    }
                    log::info!("joined overlay; {} peers known", engine.peers().len());
                }
                Err(err) => log::error!("overlay join failed: {err}"),
            }
        });
    }

    spawn_keepalive_loop(Arc::clone(&state.engine));
    if state
        .engine
        .lock()
        .expect("engine mutex poisoned")
        .config()
        .mine
    {
        spawn_miner_loop(Arc::clone(&state.engine));
    }

    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn spawn_keepalive_loop(engine: Arc<Mutex<NodeEngine>>) {
    tokio::task::spawn_blocking(move || {
        let client = HttpPeerClient::new();
        loop {
            let interval = {
                let engine = engine.lock().expect("engine mutex poisoned");
                engine.config().keepalive_interval.max(1)
            };
            std::thread::sleep(Duration::from_secs(interval));
            keepalive_round(&engine, &client);
        }
    });
}

/// One keepalive pass: ping every peer, refresh liveness, fetch any longer
/// chain discovered through the head info in ping responses, emit due
/// auto-revokes, and learn new peers from peer lists.
pub fn keepalive_round(engine: &Arc<Mutex<NodeEngine>>, client: &HttpPeerClient) {
    let now = unix_now();
    let peers: Vec<PeerInfo> = {
        let engine = engine.lock().expect("engine mutex poisoned");
        engine.peers().all().cloned().collect()
    };
    for peer in &peers {
        let response = client.ping(&peer.endpoint()).ok();
        let fetch = {
            let mut engine = engine.lock().expect("engine mutex poisoned");
            engine.process_ping(peer.asn, response, now)
        };
        if fetch {
            if let Ok(chain) = client.fetch_chain(&peer.endpoint()) {
                let mut engine = engine.lock().expect("engine mutex poisoned");
                match engine.offer_chain(chain, now) {
                    Ok(resolution) => log::debug!("keepalive fetch from {}: {resolution:?}", peer.asn),
                    Err(err) => log::warn!("keepalive fetched chain rejected: {err}"),
                }
            }
        }
        // Peer-list gossip: learn late arrivals.
        if let Ok(listed) = client.peers(&peer.endpoint()) {
            let (self_asn, known): (crate::ledger::Asn, Vec<crate::ledger::Asn>) = {
                let engine = engine.lock().expect("engine mutex poisoned");
                (
                    engine.asn(),
                    engine.peers().all().map(|p| p.asn).collect(),
                )
            };
            for candidate in listed {
                if candidate.asn == self_asn || known.contains(&candidate.asn) {
                    continue;
                }
                if let Ok(identity) = client.identity(&candidate.endpoint()) {
                    let record = {
                        let engine = engine.lock().expect("engine mutex poisoned");
                        engine.identity_record()
                    };
                    let _ = client.register(&candidate.endpoint(), &record);
                    let mut engine = engine.lock().expect("engine mutex poisoned");
                    if let Err(err) = engine.handle_register(&identity, now) {
                        log::debug!("gossiped identity rejected: {err}");
                    }
                }
            }
        }
    }
    let (revokes, targets) = {
        let mut engine = engine.lock().expect("engine mutex poisoned");
        engine.sweep_peers(now);
        let revokes = engine.auto_revoke_due(now);
        let targets: Vec<PeerInfo> = engine.peers().alive().cloned().collect();
        (revokes, targets)
    };
    for tx in &revokes {
        broadcast_tx(client, &targets, tx);
    }
}

fn spawn_miner_loop(engine: Arc<Mutex<NodeEngine>>) {
    tokio::task::spawn_blocking(move || {
        let client = HttpPeerClient::new();
        loop {
            let work = {
                let engine = engine.lock().expect("engine mutex poisoned");
                let abort = engine.mining_abort_handle();
                abort.store(false, Ordering::Relaxed);
                engine
                    .assemble_candidate(unix_now())
                    .ok()
                    .map(|candidate| (candidate, engine.config().difficulty, engine.key().clone(), abort))
            };
            let Some((candidate, difficulty, key, abort)) = work else {
                std::thread::sleep(Duration::from_millis(200));
                continue;
            };
            match crate::mining::mine(candidate, difficulty, &abort, &key, unix_now) {
                crate::mining::MineOutcome::Aborted => continue,
                crate::mining::MineOutcome::Mined(block) => {
                    let (adopted, notify, targets) = {
                        let mut engine = engine.lock().expect("engine mutex poisoned");
                        match engine.adopt_own_block(block.clone(), unix_now()) {
                            Ok(true) => {
                                let notify = engine.notify_for(&block);
                                let targets: Vec<PeerInfo> =
                                    engine.peers().alive().cloned().collect();
                                (true, Some(notify), targets)
                            }
                            Ok(false) => (false, None, Vec::new()),
                            Err(err) => {
                                log::error!("own mined block rejected: {err}");
                                (false, None, Vec::new())
                            }
                        }
                    };
                    if adopted {
                        log::info!("mined block {} ({})", block.index, block.hash);
                        if let Some(notify) = notify {
                            notify_peers(&client, &targets, &notify);
                        }
                    }
                }
            }
        }
    });
}
