//! Deterministic in-process multi-node network: virtual clock, FIFO links,
//! scripted scenarios. Node logic is the same [`NodeEngine`] the daemon
//! runs; only the transport differs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::net::{IpAddr, Ipv4Addr};
use std::path::Path;
use std::sync::atomic::AtomicBool;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::consensus::Resolution;
use crate::ledger::crypto::KeyPair;
use crate::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
use crate::ledger::{Allocation, Asn, Digest, Transaction};
use crate::mining::{mine, Difficulty, MineOutcome};
use crate::node::{NodeConfig, NodeEngine, NotifyDecision};
use crate::overlay::{BlockNotify, SignedIdentity};

/// First private-use ASN handed to simulated nodes (node i gets base + i).
pub const SIM_ASN_BASE: u32 = 64512;

/// One scripted event.
#[derive(Debug, Clone)]
pub enum SimEvent {
    /// Advance the virtual clock by N seconds, running due keepalives.
    Tick(u64),
    /// Broadcast a transaction into the network at the given node.
    SubmitTx { node: usize, tx: Box<Transaction> },
    /// Have one node assemble, mine and announce a block.
    Mine { node: usize },
    /// Sever the link between two nodes (drops in-flight messages).
    Partition { a: usize, b: usize },
    /// Restore the link between two nodes.
    Heal { a: usize, b: usize },
}

/// An ordered script of events.
#[derive(Debug, Clone, Default)]
pub struct Scenario {
    pub events: Vec<SimEvent>,
}

#[derive(Debug, Error)]
pub enum ScenarioParseError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: cannot read transaction file {path}: {source}")]
    TxFile {
        line: usize,
        path: String,
        source: std::io::Error,
    },
}

impl Scenario {
    /// Parses the line-oriented scenario DSL:
    ///
    /// ```text
    /// tick N
    /// tx NODE JSONFILE
    /// mine NODE
    /// partition A B
    /// heal A B
    /// ```
    ///
    /// `JSONFILE` paths resolve relative to `base_dir`; `#` comments and
    /// blank lines are skipped.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioParseError> {
        let mut events = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: &str| ScenarioParseError::Malformed {
                line: line_no,
                message: message.to_string(),
            };
            let mut tokens = line.split_whitespace();
            let keyword = tokens.next().expect("non-empty line has a token");
            let event = match keyword {
                "tick" => {
                    let n = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| malformed("tick takes one integer"))?;
                    SimEvent::Tick(n)
                }
                "tx" => {
                    let node = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| malformed("tx takes NODE JSONFILE"))?;
                    let file = tokens
                        .next()
                        .ok_or_else(|| malformed("tx takes NODE JSONFILE"))?;
                    let path = base_dir.join(file);
                    let text = std::fs::read_to_string(&path).map_err(|source| {
                        ScenarioParseError::TxFile {
                            line: line_no,
                            path: path.display().to_string(),
                            source,
                        }
                    })?;
                    let tx: Transaction = serde_json::from_str(&text)
                        .map_err(|e| malformed(&format!("bad transaction JSON: {e}")))?;
                    SimEvent::SubmitTx {
                        node,
                        tx: Box::new(tx),
                    }
                }
                "mine" => {
                    let node = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| malformed("mine takes NODE"))?;
                    SimEvent::Mine { node }
                }
                "partition" | "heal" => {
                    let a = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| malformed("takes two node ids"))?;
                    let b = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| malformed("takes two node ids"))?;
                    if keyword == "partition" {
                        SimEvent::Partition { a, b }
                    } else {
                        SimEvent::Heal { a, b }
                    }
                }
                other => return Err(malformed(&format!("unknown keyword {other}"))),
            };
            if tokens.next().is_some() {
                return Err(malformed("trailing tokens"));
            }
            events.push(event);
        }
        Ok(Scenario { events })
    }
}

/// A queued inter-node message; queries (ping, chain fetch) run as direct
/// calls instead.
#[derive(Debug, Clone)]
enum SimMsg {
    Tx(Box<Transaction>),
    Notify(BlockNotify),
}

/// Per-node snapshot recorded in the transcript.
#[derive(Debug, Clone)]
pub struct NodeReport {
    pub asn: Asn,
    pub head_index: u64,
    pub head_hash: Digest,
    pub ip_dump: String,
    pub graph_dump: String,
    pub invalid_log_len: usize,
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct Transcript {
    pub log: Vec<String>,
    pub nodes: Vec<NodeReport>,
    pub converged: bool,
}

/// N engines wired through an in-memory FIFO-per-link message bus with a
/// virtual clock and seeded key generation.
pub struct SimNetwork {
    nodes: Vec<NodeEngine>,
    clock: u64,
    queues: BTreeMap<(usize, usize), VecDeque<SimMsg>>,
    severed: BTreeSet<(usize, usize)>,
    log: Vec<String>,
}

fn link(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl SimNetwork {
    /// Builds an n-node full mesh over a shared genesis. Node 0 acts as the
    /// bootstrap: later nodes register there, discover earlier arrivals and
    /// introduce themselves, which yields the full mesh deterministically.
    pub fn build(
        n: usize,
        genesis_allocations: &[Allocation],
        difficulty: Difficulty,
        seed: u64,
    ) -> SimNetwork {
        assert!(n >= 1, "a network needs at least one node");
        let genesis = build_genesis_block(genesis_allocations, GENESIS_AUTHORITY, 0)
            .expect("genesis allocations must be duplicate-free");
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let mut key_seed = [0u8; 32];
            rng.fill_bytes(&mut key_seed);
            let config = NodeConfig {
                difficulty,
                ..NodeConfig::default()
            };
            let engine = NodeEngine::new(
                Asn(SIM_ASN_BASE + i as u32),
                KeyPair::from_seed(key_seed),
                IpAddr::V4(Ipv4Addr::LOCALHOST),
                9000 + i as u16,
                config,
                genesis.clone(),
            )
            .expect("genesis replays cleanly");
            nodes.push(engine);
        }

        let mut network = SimNetwork {
            nodes,
            clock: 0,
            queues: BTreeMap::new(),
            severed: BTreeSet::new(),
            log: Vec::new(),
        };

        // Simulated join via node 0.
        for joiner in 1..n {
            let record = network.nodes[joiner].identity_record();
            let known: Vec<usize> = (0..joiner).collect();
            for existing in known {
                let existing_record = network.nodes[existing].identity_record();
                network.nodes[joiner]
                    .handle_register(&existing_record, 0)
                    .expect("sim identities are unique");
                network.nodes[existing]
                    .handle_register(&record, 0)
                    .expect("sim identities are unique");
            }
        }
        network
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn node(&self, i: usize) -> &NodeEngine {
        &self.nodes[i]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut NodeEngine {
        &mut self.nodes[i]
    }

    pub fn log(&self) -> &[String] {
        &self.log
    }

    /// Registers an off-network identity (e.g. a replayed AS) at every node.
    pub fn register_identity(&mut self, record: &SignedIdentity) {
        for node in &mut self.nodes {
            if let Err(err) = node.handle_register(record, self.clock) {
                log::debug!("sim identity registration rejected: {err}");
            }
        }
    }

    fn delivery_allowed(&self, from: usize, to: usize) -> bool {
        !self.severed.contains(&link(from, to))
    }

    /// Broadcast by the transaction's creator: delivered to every node,
    /// submitting node first, the rest over links (partitions apply).
    pub fn submit_tx(&mut self, origin: usize, tx: Transaction) {
        let clock = self.clock;
        let verdict = self.nodes[origin].submit_transaction(tx.clone(), clock);
        self.log
            .push(format!("t={clock} tx {} at node {origin}: {verdict:?}", tx.txid));
        for target in 0..self.nodes.len() {
            if target == origin || !self.delivery_allowed(origin, target) {
                continue;
            }
            self.queues
                .entry((origin, target))
                .or_default()
                .push_back(SimMsg::Tx(Box::new(tx.clone())));
        }
    }

    /// One mining pass at a node: assemble, mine synchronously, adopt, and
    /// queue block notifications to alive peers.
    pub fn mine_at(&mut self, miner: usize) {
        let clock = self.clock;
        let candidate = match self.nodes[miner].assemble_candidate(clock) {
            Ok(candidate) => candidate,
            Err(_) => {
                self.log.push(format!("t={clock} mine at {miner}: no work"));
                return;
            }
        };
        let abort = AtomicBool::new(false);
        let difficulty = self.nodes[miner].config().difficulty;
        let key = self.nodes[miner].key().clone();
        let MineOutcome::Mined(block) = mine(candidate, difficulty, &abort, &key, || clock) else {
            unreachable!("sim mining runs without an abort signal");
        };
        let adopted = self.nodes[miner]
            .adopt_own_block(block.clone(), clock)
            .expect("self-mined block validates");
        assert!(adopted, "candidate built on current head");
        self.log.push(format!(
            "t={clock} node {miner} mined block {} ({})",
            block.index, block.hash
        ));
        let notify = self.nodes[miner].notify_for(&block);
        for target in 0..self.nodes.len() {
            if target == miner || !self.delivery_allowed(miner, target) {
                continue;
            }
            self.queues
                .entry((miner, target))
                .or_default()
                .push_back(SimMsg::Notify(notify.clone()));
        }
    }

    pub fn partition(&mut self, a: usize, b: usize) {
        self.severed.insert(link(a, b));
        // In-flight messages on the severed link are lost.
        self.queues.remove(&(a, b));
        self.queues.remove(&(b, a));
        self.log.push(format!("t={} partition {a} <-> {b}", self.clock));
    }

    pub fn heal(&mut self, a: usize, b: usize) {
        self.severed.remove(&link(a, b));
        self.log.push(format!("t={} heal {a} <-> {b}", self.clock));
    }

    /// Advances the virtual clock one second at a time, running a keepalive
    /// round at every node whose interval elapsed. Ping responses carry
    /// chain heads, so healed partitions reconcile here.
    pub fn tick(&mut self, seconds: u64) {
        for _ in 0..seconds {
            self.clock += 1;
            for node in 0..self.nodes.len() {
                if self.nodes[node].keepalive_due(self.clock) {
                    self.keepalive_round(node);
                }
            }
            self.drain();
        }
    }

    fn keepalive_round(&mut self, node: usize) {
        let clock = self.clock;
        let peer_asns: Vec<Asn> = self.nodes[node].peers().all().map(|p| p.asn).collect();
        for peer_asn in peer_asns {
            let Some(peer_index) = self.index_of(peer_asn) else {
                continue; // off-network identity (replayed AS)
            };
            let response = if self.delivery_allowed(node, peer_index) {
                Some(self.nodes[peer_index].head_info())
            } else {
                None
            };
            let fetch = self.nodes[node].process_ping(peer_asn, response, clock);
            if fetch {
                let chain = self.nodes[peer_index].chain().clone();
                let outcome = self.nodes[node].offer_chain(chain, clock);
                self.log.push(format!(
                    "t={clock} node {node} fetched chain from {peer_asn}: {outcome:?}"
                ));
            }
        }
        self.nodes[node].sweep_peers(clock);
        let revokes = self.nodes[node].auto_revoke_due(clock);
        for tx in revokes {
            self.submit_tx(node, tx);
        }
    }

    fn index_of(&self, asn: Asn) -> Option<usize> {
        let base = SIM_ASN_BASE;
        let idx = asn.0.checked_sub(base)? as usize;
        (idx < self.nodes.len()).then_some(idx)
    }

    /// Delivers queued messages to quiescence: one message per link per
    /// round, links in sorted order, FIFO within each link.
    pub fn drain(&mut self) {
        loop {
            let links: Vec<(usize, usize)> = self
                .queues
                .iter()
                .filter(|(_, q)| !q.is_empty())
                .map(|(k, _)| *k)
                .collect();
            if links.is_empty() {
                return;
            }
            for (from, to) in links {
                let Some(msg) = self.queues.get_mut(&(from, to)).and_then(|q| q.pop_front())
                else {
                    continue;
                };
                if !self.delivery_allowed(from, to) {
                    continue; // dropped on a severed link
                }
                self.deliver(from, to, msg);
            }
        }
    }

    fn deliver(&mut self, from: usize, to: usize, msg: SimMsg) {
        let clock = self.clock;
        match msg {
            SimMsg::Tx(tx) => {
                let verdict = self.nodes[to].submit_transaction(*tx, clock);
                if verdict.is_err() {
                    self.log
                        .push(format!("t={clock} node {to} rejected tx: {verdict:?}"));
                }
            }
            SimMsg::Notify(notify) => {
                if self.nodes[to].handle_notify(&notify) == NotifyDecision::Fetch {
                    // Synchronous chain fetch from the notifying node.
                    if self.delivery_allowed(from, to) {
                        let chain = self.nodes[from].chain().clone();
                        let outcome = self.nodes[to].offer_chain(chain, clock);
                        if matches!(outcome, Ok(Resolution::Adopt)) {
                            self.log.push(format!(
                                "t={clock} node {to} adopted chain from node {from}"
                            ));
                        }
                    }
                }
            }
        }
    }

    /// Runs a scenario to quiescence and snapshots the outcome.
    pub fn run(&mut self, scenario: &Scenario) -> Transcript {
        for event in &scenario.events {
            match event {
                SimEvent::Tick(n) => self.tick(*n),
                SimEvent::SubmitTx { node, tx } => self.submit_tx(*node, (**tx).clone()),
                SimEvent::Mine { node } => self.mine_at(*node),
                SimEvent::Partition { a, b } => self.partition(*a, *b),
                SimEvent::Heal { a, b } => self.heal(*a, *b),
            }
            self.drain();
        }
        self.drain();
        Transcript {
            log: self.log.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| {
                    let head = n.head_info();
                    NodeReport {
                        asn: n.asn(),
                        head_index: head.head_index,
                        head_hash: head.head_hash,
                        ip_dump: n.dump_ip_state(),
                        graph_dump: n.dump_graphs(),
                        invalid_log_len: n.invalid_log().len(),
                    }
                })
                .collect(),
            converged: self.assert_converged(),
        }
    }

    /// True iff every node holds the same head hash and every chain passes
    /// full validation.
    pub fn assert_converged(&self) -> bool {
        let heads: BTreeSet<Digest> = self.nodes.iter().map(|n| n.head_info().head_hash).collect();
        if heads.len() != 1 {
            return false;
        }
        self.nodes.iter().all(|n| {
            crate::consensus::validate_chain(
                n.chain(),
                &n.expected_genesis(),
                n.config().difficulty,
                n.registry(),
            )
            .is_ok()
        })
    }
}
