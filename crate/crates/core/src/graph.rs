//! Weighted digraphs and the two single-source shortest-path algorithms the
//! routing engines are built on.
//!
//! Costs are integers (micro-units) so results are identical on every
//! platform. Unreachable nodes carry [`Dist::Unreachable`] rather than a
//! large sentinel number, so relaxation can never overflow into a valid
//! looking cost.
//!
//! Both algorithms break ties the same way: among candidates with equal
//! tentative distance the lowest [`NodeId`] is settled first, and a node's
//! predecessor is the first neighbour (in that order) that achieves its
//! final distance.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::types::NodeId;

/// Edge cost in micro-units.
pub type Cost = i64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} is not part of the graph")]
    UnknownNode(NodeId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("negative edge weight {weight} on {from} -> {to}")]
    NegativeWeight { from: NodeId, to: NodeId, weight: Cost },
    #[error("negative-weight cycle reachable from the source")]
    NegativeCycleDetected,
    #[error("path cost overflowed 64-bit range")]
    Overflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub weight: Cost,
}

/// Directed graph with integer weights. Edge endpoints always belong to the
/// node set and there is at most one edge per ordered pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    nodes: BTreeSet<NodeId>,
    edges: Vec<Edge>,
    out: BTreeMap<NodeId, Vec<(NodeId, Cost)>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from a node list and an edge list, validating both.
    pub fn from_parts(
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId, Cost)>,
    ) -> Result<Self, GraphError> {
        let mut g = Graph::new();
        for n in nodes {
            g.add_node(n);
        }
        for (a, b, w) in edges {
            g.add_edge(a, b, w)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, n: NodeId) {
        self.nodes.insert(n);
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId, weight: Cost) -> Result<(), GraphError> {
        for n in [from, to] {
            if !self.nodes.contains(&n) {
                return Err(GraphError::UnknownNode(n));
            }
        }
        let out = self.out.entry(from).or_default();
        if out.iter().any(|&(t, _)| t == to) {
            return Err(GraphError::DuplicateEdge(from, to));
        }
        out.push((to, weight));
        out.sort_unstable_by_key(|&(t, _)| t);
        self.edges.push(Edge { from, to, weight });
        Ok(())
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.nodes.contains(&n)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Outgoing edges of `n`, sorted by target.
    pub fn out_edges(&self, n: NodeId) -> &[(NodeId, Cost)] {
        self.out.get(&n).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn weight(&self, from: NodeId, to: NodeId) -> Option<Cost> {
        self.out_edges(from)
            .iter()
            .find(|&&(t, _)| t == to)
            .map(|&(_, w)| w)
    }
}

/// Tentative or final distance of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dist {
    Finite(Cost),
    Unreachable,
}

impl Dist {
    pub fn finite(self) -> Option<Cost> {
        match self {
            Dist::Finite(c) => Some(c),
            Dist::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, Dist::Finite(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathResult {
    pub source: NodeId,
    dist: BTreeMap<NodeId, Dist>,
    pred: BTreeMap<NodeId, NodeId>,
}

impl PathResult {
    fn init(graph: &Graph, source: NodeId) -> Self {
        let dist = graph
            .nodes()
            .map(|n| (n, if n == source { Dist::Finite(0) } else { Dist::Unreachable }))
            .collect();
        PathResult {
            source,
            dist,
            pred: BTreeMap::new(),
        }
    }

    pub fn dist(&self, n: NodeId) -> Dist {
        self.dist.get(&n).copied().unwrap_or(Dist::Unreachable)
    }

    pub fn pred(&self, n: NodeId) -> Option<NodeId> {
        self.pred.get(&n).copied()
    }

    pub fn distances(&self) -> &BTreeMap<NodeId, Dist> {
        &self.dist
    }

    pub fn predecessors(&self) -> &BTreeMap<NodeId, NodeId> {
        &self.pred
    }

    /// The neighbour of the source through which `dest` is reached.
    pub fn first_hop(&self, dest: NodeId) -> Option<NodeId> {
        if dest == self.source || !self.dist(dest).is_reachable() {
            return None;
        }
        let mut cur = dest;
        for _ in 0..self.dist.len() {
            let p = self.pred(cur)?;
            if p == self.source {
                return Some(cur);
            }
            cur = p;
        }
        None
    }
}

fn add_cost(a: Cost, b: Cost) -> Result<Cost, GraphError> {
    a.checked_add(b).ok_or(GraphError::Overflow)
}

/// Bellman-Ford: |V|-1 passes relaxing every edge, then one verification
/// pass that reports a reachable negative cycle if any edge can still be
/// improved.
pub fn bellman_ford(graph: &Graph, source: NodeId) -> Result<PathResult, GraphError> {
    if !graph.contains(source) {
        return Err(GraphError::UnknownNode(source));
    }
    let mut res = PathResult::init(graph, source);
    let mut edges: Vec<Edge> = graph.edges().to_vec();
    edges.sort_unstable_by_key(|e| (e.from, e.to));

    for _ in 1..graph.node_count() {
        for e in &edges {
            if let Dist::Finite(du) = res.dist(e.from) {
                let cand = add_cost(du, e.weight)?;
                if Dist::Finite(cand) < res.dist(e.to) {
                    res.dist.insert(e.to, Dist::Finite(cand));
                    res.pred.insert(e.to, e.from);
                }
            }
        }
    }

    for e in &edges {
        if let Dist::Finite(du) = res.dist(e.from) {
            if Dist::Finite(add_cost(du, e.weight)?) < res.dist(e.to) {
                return Err(GraphError::NegativeCycleDetected);
            }
        }
    }

    // With strictly positive weights every tight in-edge comes from a node
    // with a smaller distance, so the settle-order predecessor is well
    // defined; pick it so both algorithms agree.
    if edges.iter().all(|e| e.weight > 0) {
        let mut best: BTreeMap<NodeId, (Cost, NodeId)> = BTreeMap::new();
        for e in &edges {
            if let (Dist::Finite(du), Dist::Finite(dv)) = (res.dist(e.from), res.dist(e.to)) {
                if e.to != source && du + e.weight == dv {
                    let key = (du, e.from);
                    best.entry(e.to)
                        .and_modify(|k| *k = (*k).min(key))
                        .or_insert(key);
                }
            }
        }
        res.pred = best.into_iter().map(|(v, (_, u))| (v, u)).collect();
    }
    Ok(res)
}

/// Dijkstra over non-negative weights. Negative weights are rejected rather
/// than silently producing wrong distances.
pub fn dijkstra(graph: &Graph, source: NodeId) -> Result<PathResult, GraphError> {
    dijkstra_until(graph, source, None)
}

/// Dijkstra that may stop as soon as `target` has been settled. Distances of
/// nodes not yet settled at that point are tentative.
pub fn dijkstra_until(
    graph: &Graph,
    source: NodeId,
    target: Option<NodeId>,
) -> Result<PathResult, GraphError> {
    if !graph.contains(source) {
        return Err(GraphError::UnknownNode(source));
    }
    if let Some(e) = graph.edges().iter().find(|e| e.weight < 0) {
        return Err(GraphError::NegativeWeight {
            from: e.from,
            to: e.to,
            weight: e.weight,
        });
    }
    let mut res = PathResult::init(graph, source);
    let mut visited: BTreeSet<NodeId> = BTreeSet::new();
    let mut frontier = BinaryHeap::new();
    frontier.push(Reverse((0, source)));

    while let Some(Reverse((d, u))) = frontier.pop() {
        if !visited.insert(u) {
            continue;
        }
        if Some(u) == target {
            break;
        }
        for &(v, w) in graph.out_edges(u) {
            if visited.contains(&v) {
                continue;
            }
            let cand = add_cost(d, w)?;
            if Dist::Finite(cand) < res.dist(v) {
                res.dist.insert(v, Dist::Finite(cand));
                res.pred.insert(v, u);
                frontier.push(Reverse((cand, v)));
            }
        }
    }
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no path to {0}")]
pub struct NoPath(pub NodeId);

/// Source-to-`dest` node sequence recovered from the predecessor map.
pub fn extract_path(result: &PathResult, dest: NodeId) -> Result<Vec<NodeId>, NoPath> {
    if !result.dist(dest).is_reachable() {
        return Err(NoPath(dest));
    }
    let mut path = vec![dest];
    let mut cur = dest;
    while cur != result.source {
        let p = result.pred(cur).ok_or(NoPath(dest))?;
        if path.len() > result.dist.len() {
            return Err(NoPath(dest));
        }
        path.push(p);
        cur = p;
    }
    path.reverse();
    Ok(path)
}
