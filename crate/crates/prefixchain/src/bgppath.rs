//! Per-prefix directed AS-level graphs and the Announce/Withdraw transaction
//! semantics.
//!
//! Each prefix gets one graph whose sink is the prefix itself. Edges follow
//! the traffic direction: an edge `A -> B` means A forwards traffic for the
//! prefix to B. Origin edges (`owner -> prefix`) are owned by the IP
//! allocation state and rebuilt by [`sync_origins`] after every applied
//! Assign or Revoke; Announce transactions only ever add learner edges
//! pointing at the advertiser.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ledger::{AnnouncePayload, Asn, PartialPath, Prefix, TransactionOutput, WithdrawPayload};
use crate::verdict::{InvalidReason, Roster, Verdict};

/// A node in a prefix graph: the prefix sink or an AS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GraphNode {
    /// The prefix itself; every valid path ends here.
    Sink,
    As(Asn),
}

impl GraphNode {
    fn label(&self, prefix: Prefix) -> String {
        match self {
            GraphNode::Sink => format!("P:{prefix}"),
            GraphNode::As(asn) => format!("{asn}"),
        }
    }
}

pub type Edge = (GraphNode, GraphNode);

/// Directed AS-level graph for one prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixGraph {
    prefix: Prefix,
    nodes: BTreeSet<GraphNode>,
    edges: BTreeSet<Edge>,
}

impl PrefixGraph {
    pub fn new(prefix: Prefix) -> Self {
        PrefixGraph {
            prefix,
            nodes: BTreeSet::from([GraphNode::Sink]),
            edges: BTreeSet::new(),
        }
    }

    pub fn prefix(&self) -> Prefix {
        self.prefix
    }

    pub fn nodes(&self) -> &BTreeSet<GraphNode> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn contains_edge(&self, from: GraphNode, to: GraphNode) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn contains_as(&self, asn: Asn) -> bool {
        self.nodes.contains(&GraphNode::As(asn))
    }

    /// ASes with an origin edge straight to the sink.
    pub fn origins(&self) -> BTreeSet<Asn> {
        self.edges
            .iter()
            .filter_map(|(from, to)| match (from, to) {
                (GraphNode::As(a), GraphNode::Sink) => Some(*a),
                _ => None,
            })
            .collect()
    }

    fn add_edge(&mut self, from: GraphNode, to: GraphNode) {
        self.nodes.insert(from);
        self.nodes.insert(to);
        self.edges.insert((from, to));
    }

    fn successors(&self, node: GraphNode) -> impl Iterator<Item = GraphNode> + '_ {
        self.edges
            .iter()
            .filter(move |(from, _)| *from == node)
            .map(|(_, to)| *to)
    }

    /// Whether `asn` has at least one directed path to the sink.
    pub fn has_path(&self, asn: Asn) -> bool {
        let start = GraphNode::As(asn);
        if !self.nodes.contains(&start) {
            return false;
        }
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            for next in self.successors(node) {
                if next == GraphNode::Sink {
                    return true;
                }
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        false
    }

    /// Whether inserting `new_edges` would close a directed cycle.
    pub fn would_cycle(&self, new_edges: &[Edge]) -> bool {
        let mut edges = self.edges.clone();
        edges.extend(new_edges.iter().copied());
        let mut nodes = self.nodes.clone();
        for (from, to) in new_edges {
            nodes.insert(*from);
            nodes.insert(*to);
        }
        // Iterative DFS with discovery coloring; the sink has no out-edges
        // and can never participate in a cycle.
        let mut adjacency: BTreeMap<GraphNode, Vec<GraphNode>> = BTreeMap::new();
        for (from, to) in &edges {
            adjacency.entry(*from).or_default().push(*to);
        }
        #[derive(PartialEq, Clone, Copy)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let mut color: BTreeMap<GraphNode, Color> =
            nodes.iter().map(|n| (*n, Color::White)).collect();
        for &start in &nodes {
            if color[&start] != Color::White {
                continue;
            }
            let mut stack = vec![(start, false)];
            while let Some((node, children_done)) = stack.pop() {
                if children_done {
                    color.insert(node, Color::Black);
                    continue;
                }
                match color[&node] {
                    Color::Black => continue,
                    Color::Gray => continue,
                    Color::White => {}
                }
                color.insert(node, Color::Gray);
                stack.push((node, true));
                for next in adjacency.get(&node).into_iter().flatten() {
                    match color[next] {
                        Color::Gray => return true,
                        Color::White => stack.push((*next, false)),
                        Color::Black => {}
                    }
                }
            }
        }
        false
    }

    /// Drops every AS node that can no longer reach the sink, together with
    /// its incident edges.
    fn prune_unreachable(&mut self) {
        // Reverse reachability from the sink.
        let mut reverse: BTreeMap<GraphNode, Vec<GraphNode>> = BTreeMap::new();
        for (from, to) in &self.edges {
            reverse.entry(*to).or_default().push(*from);
        }
        let mut keep = BTreeSet::from([GraphNode::Sink]);
        let mut queue = VecDeque::from([GraphNode::Sink]);
        while let Some(node) = queue.pop_front() {
            for prev in reverse.get(&node).into_iter().flatten() {
                if keep.insert(*prev) {
                    queue.push_back(*prev);
                }
            }
        }
        self.nodes.retain(|n| keep.contains(n));
        self.edges
            .retain(|(from, to)| keep.contains(from) && keep.contains(to));
    }

    /// Deterministic DOT rendering: sorted node declarations, then sorted
    /// edges, so dumps are diffable.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("digraph \"P:{}\" {{\n", self.prefix));
        for node in &self.nodes {
            out.push_str(&format!("  \"{}\";\n", node.label(self.prefix)));
        }
        for (from, to) in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\";\n",
                from.label(self.prefix),
                to.label(self.prefix)
            ));
        }
        out.push_str("}\n");
        out
    }
}

impl fmt::Display for PrefixGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dot())
    }
}

/// All per-prefix graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BgpPathState {
    graphs: BTreeMap<Prefix, PrefixGraph>,
}

impl BgpPathState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn graph(&self, prefix: Prefix) -> Option<&PrefixGraph> {
        self.graphs.get(&prefix)
    }

    pub fn prefixes(&self) -> impl Iterator<Item = Prefix> + '_ {
        self.graphs.keys().copied()
    }

    /// Whether the graph holds any edge beyond the origin edges; used to
    /// warn when a Revoke clears live routing state.
    pub fn has_announce_edges(&self, prefix: Prefix) -> bool {
        self.graphs
            .get(&prefix)
            .map(|g| g.edges.iter().any(|(_, to)| *to != GraphNode::Sink))
            .unwrap_or(false)
    }

    /// Concatenated DOT dump of every prefix graph, sorted by prefix.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for graph in self.graphs.values() {
            out.push_str(&graph.to_dot());
        }
        out
    }
}

/// Resets a prefix graph to its ownership skeleton: the sink plus one edge
/// per current owner. Called after every applied Assign or Revoke (and at
/// genesis); all announce-derived edges for the prefix are discarded.
pub fn sync_origins(state: &mut BgpPathState, prefix: Prefix, owners: &BTreeSet<Asn>) {
    let mut graph = PrefixGraph::new(prefix);
    for owner in owners {
        graph.add_edge(GraphNode::As(*owner), GraphNode::Sink);
    }
    state.graphs.insert(prefix, graph);
}

pub fn validate_announce(
    state: &BgpPathState,
    payload: &AnnouncePayload,
    roster: &Roster,
) -> Verdict {
    Verdict::from(validate_announce_inner(state, payload, roster))
}

fn validate_announce_inner(
    state: &BgpPathState,
    payload: &AnnouncePayload,
    roster: &Roster,
) -> Result<(), InvalidReason> {
    payload.check_invariants()?;
    let graph = state
        .graph(payload.prefix)
        .ok_or(InvalidReason::UnknownPrefix)?;
    let source = GraphNode::As(payload.as_source);

    // (a) Origin check: an empty source list claims origination, which
    // requires an ownership edge; otherwise every listed neighbor must be an
    // existing learning edge with a live path to the prefix.
    if payload.as_source_list.is_empty() {
        if !graph.contains_edge(source, GraphNode::Sink) {
            return Err(InvalidReason::InvalidOrigin);
        }
    } else {
        for learned_from in &payload.as_source_list {
            let edge_ok = graph.contains_edge(source, GraphNode::As(*learned_from));
            if !edge_ok || !graph.has_path(*learned_from) {
                return Err(InvalidReason::InvalidOrigin);
            }
        }
    }

    // (b) Every referenced AS must be a registered network participant.
    if !roster.contains_all(payload.as_source_list.iter().chain(&payload.as_dest_list)) {
        return Err(InvalidReason::NotInNetwork);
    }

    // (c) The new learner edges must keep the graph acyclic.
    let new_edges: Vec<Edge> = payload
        .as_dest_list
        .iter()
        .map(|d| (GraphNode::As(*d), source))
        .collect();
    if graph.would_cycle(&new_edges) {
        return Err(InvalidReason::LoopDetected);
    }
    Ok(())
}

/// The derived output of an Announce: the partial path set formed between
/// source list, source, and destination list.
pub fn announce_output(payload: &AnnouncePayload) -> TransactionOutput {
    let mut paths = Vec::new();
    if payload.as_source_list.is_empty() {
        for dest in &payload.as_dest_list {
            paths.push(PartialPath {
                prefix: payload.prefix,
                path: vec![payload.as_source, *dest],
            });
        }
    } else {
        for learned_from in &payload.as_source_list {
            for dest in &payload.as_dest_list {
                paths.push(PartialPath {
                    prefix: payload.prefix,
                    path: vec![*learned_from, payload.as_source, *dest],
                });
            }
        }
    }
    TransactionOutput::Announce { paths }
}

/// Applies a validated Announce: one learner edge per destination, pointing
/// at the advertiser. Idempotent for edges already present.
pub fn apply_announce(state: &mut BgpPathState, payload: &AnnouncePayload) -> Result<(), InvalidReason> {
    let graph = state
        .graphs
        .get_mut(&payload.prefix)
        .ok_or(InvalidReason::UnknownPrefix)?;
    for dest in &payload.as_dest_list {
        graph.add_edge(GraphNode::As(*dest), GraphNode::As(payload.as_source));
    }
    Ok(())
}

pub fn validate_withdraw(state: &BgpPathState, payload: &WithdrawPayload) -> Verdict {
    Verdict::from(validate_withdraw_inner(state, payload))
}

fn validate_withdraw_inner(
    state: &BgpPathState,
    payload: &WithdrawPayload,
) -> Result<(), InvalidReason> {
    payload.check_invariants()?;
    let has_path = state
        .graph(payload.prefix)
        .map(|g| g.has_path(payload.as_source))
        .unwrap_or(false);
    if !has_path {
        return Err(InvalidReason::NoPath);
    }
    Ok(())
}

pub fn withdraw_output(payload: &WithdrawPayload) -> TransactionOutput {
    TransactionOutput::Withdraw {
        prefix: payload.prefix,
        as_source: payload.as_source,
    }
}

/// Applies a validated Withdraw: removes every edge from the withdrawer's
/// learners, then prunes any AS left without a path to the prefix. The
/// withdrawer keeps its own outgoing edges.
pub fn apply_withdraw(state: &mut BgpPathState, payload: &WithdrawPayload) -> Result<(), InvalidReason> {
    let graph = state
        .graphs
        .get_mut(&payload.prefix)
        .ok_or(InvalidReason::NoPath)?;
    let target = GraphNode::As(payload.as_source);
    graph.edges.retain(|(_, to)| *to != target);
    graph.prune_unreachable();
    Ok(())
}
