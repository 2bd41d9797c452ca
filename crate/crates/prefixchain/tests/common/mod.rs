//! Shared test fixtures: the independent raw-path graph oracle, a synthetic
//! BGP update generator, and chain-building helpers.
//!
//! The oracle is built on petgraph and never touches the implementation's
//! own graph code, so graph-equivalence checks compare two independent
//! routes to the same answer.

use std::collections::{BTreeMap, BTreeSet};
use std::net::{IpAddr, Ipv4Addr};
use std::sync::atomic::AtomicBool;

use petgraph::algo::has_path_connecting;
use petgraph::graphmap::DiGraphMap;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use prefixchain::bgppath::GraphNode;
use prefixchain::ingest::{BgpUpdateRecord, UpdateKind};
use prefixchain::ledger::crypto::DeterministicKeyring;
use prefixchain::ledger::genesis::{build_genesis_block, GENESIS_AUTHORITY};
use prefixchain::overlay::SignedIdentity;
use prefixchain::{
    Allocation, Asn, Difficulty, KeyPair, NodeConfig, NodeEngine, Prefix, Transaction,
};

/// Oracle node: `None` is the prefix sink.
pub type ONode = Option<u32>;

/// Per-prefix directed graphs built straight from full AS-paths.
pub struct Oracle {
    graphs: BTreeMap<Prefix, DiGraphMap<ONode, ()>>,
}

impl Oracle {
    pub fn new(allocations: &[Allocation]) -> Oracle {
        let mut graphs: BTreeMap<Prefix, DiGraphMap<ONode, ()>> = BTreeMap::new();
        for alloc in allocations {
            let graph = graphs.entry(alloc.prefix).or_insert_with(|| {
                let mut g = DiGraphMap::new();
                g.add_node(None);
                g
            });
            graph.add_edge(Some(alloc.asn.0), None, ());
        }
        Oracle { graphs }
    }

    /// Folds one update record into the oracle graphs.
    pub fn apply(&mut self, record: &BgpUpdateRecord) {
        match record.kind {
            UpdateKind::Announce => {
                let path = prefixchain::ingest::collapse_prepends(&record.as_path);
                let Some(graph) = self.graphs.get_mut(&record.prefix) else {
                    return;
                };
                // Edges follow the traffic direction: each hop forwards to
                // the neighbor it learned the prefix from.
                for pair in path.windows(2) {
                    graph.add_edge(Some(pair[0].0), Some(pair[1].0), ());
                }
            }
            UpdateKind::Withdraw => {
                let Some(withdrawer) = record.withdrawer else {
                    return;
                };
                let Some(graph) = self.graphs.get_mut(&record.prefix) else {
                    return;
                };
                let target = Some(withdrawer.0);
                let learners: Vec<ONode> = graph
                    .neighbors_directed(target, petgraph::Direction::Incoming)
                    .collect();
                for learner in learners {
                    graph.remove_edge(learner, target);
                }
                prune(graph);
            }
        }
    }

    /// Node and edge sets for one prefix, in the implementation's node type
    /// so the two sides compare directly.
    pub fn sets(&self, prefix: Prefix) -> (BTreeSet<GraphNode>, BTreeSet<(GraphNode, GraphNode)>) {
        let Some(graph) = self.graphs.get(&prefix) else {
            return (BTreeSet::new(), BTreeSet::new());
        };
        let to_node = |n: ONode| match n {
            None => GraphNode::Sink,
            Some(asn) => GraphNode::As(Asn(asn)),
        };
        let nodes = graph.nodes().map(to_node).collect();
        let edges = graph
            .all_edges()
            .map(|(from, to, _)| (to_node(from), to_node(to)))
            .collect();
        (nodes, edges)
    }

    pub fn prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.graphs.keys().copied()
    }
}

/// Drops every node without a path to the sink.
fn prune(graph: &mut DiGraphMap<ONode, ()>) {
    let doomed: Vec<ONode> = graph
        .nodes()
        .filter(|n| n.is_some() && !has_path_connecting(&*graph, *n, None, None))
        .collect();
    for node in doomed {
        graph.remove_node(node);
    }
}

/// Compares implementation and oracle graphs for every prefix; returns the
/// mismatching prefixes.
pub fn graph_mismatches(
    states: &prefixchain::ReplayedStates,
    oracle: &Oracle,
) -> Vec<Prefix> {
    let mut bad = Vec::new();
    for prefix in oracle.prefixes() {
        let (oracle_nodes, oracle_edges) = oracle.sets(prefix);
        let (impl_nodes, impl_edges) = match states.bgp.graph(prefix) {
            Some(graph) => (graph.nodes().clone(), graph.edges().clone()),
            None => (BTreeSet::new(), BTreeSet::new()),
        };
        if oracle_nodes != impl_nodes || oracle_edges != impl_edges {
            bad.push(prefix);
        }
    }
    bad
}

/// Synthetic topology: a seeded per-prefix propagation DAG over a shared AS
/// population, plus announce records tracing random DAG paths. Paths are
/// oracle-consistent by construction (valid origins, loop-free unions).
pub struct Synthetic {
    pub allocations: Vec<Allocation>,
    pub records: Vec<BgpUpdateRecord>,
    pub ases: Vec<Asn>,
}

pub fn synthetic_announces(
    n_ases: u32,
    n_prefixes: usize,
    n_records: usize,
    seed: u64,
) -> Synthetic {
    assert!(n_ases >= 4);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let ases: Vec<Asn> = (1..=n_ases).map(Asn).collect();

    let mut allocations = Vec::new();
    let mut parents_per_prefix: Vec<(Prefix, Vec<Asn>, BTreeMap<Asn, Vec<Asn>>)> = Vec::new();
    for p in 0..n_prefixes {
        let prefix = Prefix::v4(10, (p / 256) as u8, (p % 256) as u8, 0, 24).unwrap();
        let mut order = ases.clone();
        order.shuffle(&mut rng);
        let owner = order[0];
        allocations.push(Allocation { prefix, asn: owner });
        // Each later AS learns from one or two earlier ones; edges point
        // toward the owner, so the per-prefix union stays acyclic.
        let mut parents: BTreeMap<Asn, Vec<Asn>> = BTreeMap::new();
        for i in 1..order.len() {
            let n_parents = if i == 1 { 1 } else { 1 + rng.gen_range(0..2) };
            let mut chosen = BTreeSet::new();
            for _ in 0..n_parents {
                chosen.insert(order[rng.gen_range(0..i)]);
            }
            parents.insert(order[i], chosen.into_iter().collect());
        }
        parents_per_prefix.push((prefix, order, parents));
    }

    let mut records = Vec::new();
    for t in 0..n_records {
        let (prefix, order, parents) = &parents_per_prefix[rng.gen_range(0..n_prefixes)];
        let owner = order[0];
        // Random walk from a non-owner AS down its parents to the owner.
        let start = order[1 + rng.gen_range(0..order.len() - 1)];
        let mut path = vec![start];
        let mut cursor = start;
        while cursor != owner {
            let options = &parents[&cursor];
            cursor = options[rng.gen_range(0..options.len())];
            path.push(cursor);
        }
        records.push(BgpUpdateRecord {
            timestamp: 1_000 + t as u64,
            kind: UpdateKind::Announce,
            prefix: *prefix,
            as_path: path,
            withdrawer: None,
        });
    }
    Synthetic {
        allocations,
        records,
        ases,
    }
}

/// A single-node engine ready to accept replayed transactions: every ASN in
/// `participants` gets a deterministic registered identity.
pub fn engine_with_participants(
    allocations: &[Allocation],
    participants: &[Asn],
    keyring: &mut DeterministicKeyring,
    difficulty: u8,
    max_tx: usize,
) -> NodeEngine {
    let genesis = build_genesis_block(allocations, GENESIS_AUTHORITY, 0).unwrap();
    let config = NodeConfig {
        difficulty: Difficulty::new(difficulty).unwrap(),
        max_tx_per_block: max_tx,
        ..NodeConfig::default()
    };
    let mut engine = NodeEngine::new(
        Asn(64512),
        KeyPair::from_seed([212; 32]),
        IpAddr::V4(Ipv4Addr::LOCALHOST),
        8640,
        config,
        genesis,
    )
    .unwrap();
    for asn in participants {
        let key = keyring.key_for(*asn).clone();
        let record = SignedIdentity::build(*asn, IpAddr::V4(Ipv4Addr::LOCALHOST), 0, &key);
        engine.handle_register(&record, 0).unwrap();
    }
    engine
}

/// Submits transactions and mines them into blocks until the pool drains.
/// Returns the number of blocks mined.
pub fn submit_and_mine_all(engine: &mut NodeEngine, txs: &[Transaction], now: u64) -> usize {
    for tx in txs {
        engine
            .submit_transaction(tx.clone(), now)
            .unwrap_or_else(|reason| panic!("tx {} rejected: {reason:?}", tx.txid));
    }
    mine_until_empty(engine, now)
}

pub fn mine_until_empty(engine: &mut NodeEngine, now: u64) -> usize {
    let abort = AtomicBool::new(false);
    let mut blocks = 0;
    while !engine.mempool().is_empty() {
        let candidate = match engine.assemble_candidate(now) {
            Ok(candidate) => candidate,
            Err(_) => break,
        };
        let key = engine.key().clone();
        let prefixchain::mining::MineOutcome::Mined(block) =
            prefixchain::mining::mine(candidate, engine.config().difficulty, &abort, &key, || now)
        else {
            panic!("mining aborted without an abort signal");
        };
        assert!(engine.adopt_own_block(block, now).unwrap());
        blocks += 1;
    }
    blocks
}
