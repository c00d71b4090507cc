//! Source-route computation with Bellman-Ford under ESD or hop-count weights.
//!
//! Ties are resolved totally: lower cost first, then fewer hops, then the
//! lexicographically smaller node sequence. Costs within a relative `1e-9`
//! of each other count as equal so that mathematically equal ESD sums do not
//! split on rounding.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use thiserror::Error;

use crate::dissemination::StateTable;
use crate::metric::{esd_link, LinkCost, NodeState};
use crate::topology::{MeshGraph, NodeId};

const COST_REL_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RoutingError {
    #[error("state table of node {owner} lacks an entry for node {missing}")]
    MissingState { owner: NodeId, missing: NodeId },
    #[error("link {0}-{1} has negative or non-finite weight {2}")]
    NegativeWeight(NodeId, NodeId, f64),
    #[error("no weight for link {0}-{1}")]
    MissingWeight(NodeId, NodeId),
    #[error("destination {dst} unreachable from {src}")]
    Unreachable { src: NodeId, dst: NodeId },
    #[error("source and destination are both {0}")]
    SameEndpoints(NodeId),
    #[error("node {0} out of range")]
    InvalidNode(NodeId),
    #[error("invalid route: {0}")]
    InvalidRoute(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricKind {
    Esd,
    HopCount,
}

impl MetricKind {
    pub const ALL: [MetricKind; 2] = [MetricKind::Esd, MetricKind::HopCount];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Esd => "esd",
            MetricKind::HopCount => "hopcount",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "esd" => Ok(MetricKind::Esd),
            "hopcount" | "hop_count" | "hop-count" | "hc" => Ok(MetricKind::HopCount),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

/// Simple path from source to destination, attached to every packet of a flow.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceRoute(Vec<NodeId>);

impl SourceRoute {
    /// Validates simplicity and adjacency.
    pub fn new(g: &MeshGraph, nodes: Vec<NodeId>) -> Result<Self, RoutingError> {
        if nodes.len() < 2 {
            return Err(RoutingError::InvalidRoute(format!("{} node(s)", nodes.len())));
        }
        let mut seen = vec![false; g.node_count()];
        for &k in &nodes {
            if !g.contains(k) {
                return Err(RoutingError::InvalidNode(k));
            }
            if std::mem::replace(&mut seen[k.index()], true) {
                return Err(RoutingError::InvalidRoute(format!("node {k} repeats")));
            }
        }
        if let Some(w) = nodes.windows(2).find(|w| !g.are_adjacent(w[0], w[1])) {
            return Err(RoutingError::InvalidRoute(format!("{} and {} are not adjacent", w[0], w[1])));
        }
        Ok(Self(nodes))
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn source(&self) -> NodeId {
        self.0[0]
    }

    pub fn destination(&self) -> NodeId {
        self.0[self.0.len() - 1]
    }

    pub fn hops(&self) -> usize {
        self.0.len() - 1
    }

    pub fn reversed(&self) -> SourceRoute {
        SourceRoute(self.0.iter().rev().copied().collect())
    }

    /// Node after `k` on the route, if `k` is on it and not the destination.
    pub fn next_hop(&self, k: NodeId) -> Option<NodeId> {
        let i = self.0.iter().position(|&n| n == k)?;
        self.0.get(i + 1).copied()
    }
}

impl Deref for SourceRoute {
    type Target = [NodeId];

    fn deref(&self) -> &[NodeId] {
        &self.0
    }
}

impl fmt::Display for SourceRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

/// Undirected link weights keyed by `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkWeights(BTreeMap<(NodeId, NodeId), LinkCost>);

impl LinkWeights {
    pub fn insert(&mut self, a: NodeId, b: NodeId, w: LinkCost) {
        self.0.insert((a.min(b), a.max(b)), w);
    }

    pub fn get(&self, a: NodeId, b: NodeId) -> Option<LinkCost> {
        self.0.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(NodeId, NodeId), &LinkCost)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<((NodeId, NodeId), LinkCost)> for LinkWeights {
    fn from_iter<I: IntoIterator<Item = ((NodeId, NodeId), LinkCost)>>(iter: I) -> Self {
        let mut w = LinkWeights::default();
        for ((a, b), c) in iter {
            w.insert(a, b, c);
        }
        w
    }
}

/// Weights from a full per-node state vector.
pub fn link_weights_from_states(g: &MeshGraph, states: &[NodeState], m: MetricKind) -> LinkWeights {
    g.links()
        .iter()
        .map(|&(a, b)| {
            let w = match m {
                MetricKind::HopCount => LinkCost(1.0),
                MetricKind::Esd => esd_link(&states[a.index()], &states[b.index()]),
            };
            ((a, b), w)
        })
        .collect()
}

/// Weights as seen from one node's state table. ESD needs a complete table.
pub fn link_weights(g: &MeshGraph, t: &StateTable, m: MetricKind) -> Result<LinkWeights, RoutingError> {
    match m {
        MetricKind::HopCount => Ok(g.links().iter().map(|&l| (l, LinkCost(1.0))).collect()),
        MetricKind::Esd => {
            let states = t.snapshot().ok_or_else(|| RoutingError::MissingState {
                owner: t.owner(),
                missing: g.nodes().find(|&k| t.get(k).is_none()).unwrap_or_default(),
            })?;
            Ok(link_weights_from_states(g, &states, m))
        }
    }
}

#[inline]
fn cost_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_REL_EPS * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
struct Label {
    cost: f64,
    path: Vec<NodeId>,
}

impl Label {
    /// Strictly better under (cost, hops, lexicographic path).
    fn beats(&self, other: &Label) -> bool {
        if !cost_eq(self.cost, other.cost) {
            return self.cost < other.cost;
        }
        match self.path.len().cmp(&other.path.len()) {
            std::cmp::Ordering::Equal => self.path < other.path,
            ord => ord == std::cmp::Ordering::Less,
        }
    }
}

/// Single-source shortest paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    pub src: NodeId,
    /// `f64::INFINITY` for unreachable nodes.
    pub dist: Vec<f64>,
    pub pred: Vec<Option<NodeId>>,
    paths: Vec<Option<Vec<NodeId>>>,
}

impl ShortestPaths {
    /// Best node sequence `src..=v`, or `None` if unreachable.
    pub fn path_to(&self, v: NodeId) -> Option<&[NodeId]> {
        self.paths.get(v.index())?.as_deref()
    }
}

/// Bellman-Ford over undirected non-negative weights.
///
/// Relaxation keeps, for each node, the best label under the total tie-break
/// order, so predecessors are deterministic.
pub fn bellman_ford(g: &MeshGraph, w: &LinkWeights, src: NodeId) -> Result<ShortestPaths, RoutingError> {
    if !g.contains(src) {
        return Err(RoutingError::InvalidNode(src));
    }
    let mut arcs = Vec::with_capacity(2 * g.link_count());
    for &(a, b) in g.links() {
        let c = w.get(a, b).ok_or(RoutingError::MissingWeight(a, b))?.0;
        if !c.is_finite() || c < 0.0 {
            return Err(RoutingError::NegativeWeight(a, b, c));
        }
        arcs.push((a, b, c));
        arcs.push((b, a, c));
    }

    let n = g.node_count();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    labels[src.index()] = Some(Label { cost: 0.0, path: vec![src] });

    // Non-negative weights: settles within n - 1 rounds; one spare round
    // absorbs tie-break refinements.
    for _ in 0..n.max(1) {
        let mut changed = false;
        for &(u, v, c) in &arcs {
            let Some(lu) = &labels[u.index()] else { continue };
            if lu.path.contains(&v) {
                continue;
            }
            let mut path = lu.path.clone();
            path.push(v);
            let cand = Label { cost: lu.cost + c, path };
            if labels[v.index()].as_ref().is_none_or(|lv| cand.beats(lv)) {
                labels[v.index()] = Some(cand);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let dist = labels.iter().map(|l| l.as_ref().map_or(f64::INFINITY, |l| l.cost)).collect();
    let pred = labels
        .iter()
        .map(|l| l.as_ref().and_then(|l| l.path.len().checked_sub(2).map(|i| l.path[i])))
        .collect();
    let paths = labels.into_iter().map(|l| l.map(|l| l.path)).collect();
    Ok(ShortestPaths { src, dist, pred, paths })
}

/// Minimum-cost simple path `src -> dst` under precomputed weights.
pub fn route_with_weights(g: &MeshGraph, w: &LinkWeights, src: NodeId, dst: NodeId) -> Result<SourceRoute, RoutingError> {
    if src == dst {
        return Err(RoutingError::SameEndpoints(src));
    }
    if !g.contains(dst) {
        return Err(RoutingError::InvalidNode(dst));
    }
    let sp = bellman_ford(g, w, src)?;
    let path = sp.path_to(dst).ok_or(RoutingError::Unreachable { src, dst })?;
    SourceRoute::new(g, path.to_vec())
}

/// Route from `src`'s view of the network.
pub fn compute_route(
    g: &MeshGraph,
    t: &StateTable,
    m: MetricKind,
    src: NodeId,
    dst: NodeId,
) -> Result<SourceRoute, RoutingError> {
    let w = link_weights(g, t, m)?;
    route_with_weights(g, &w, src, dst)
}

/// Sum of link weights along `route`.
pub fn route_cost(w: &LinkWeights, route: &[NodeId]) -> Option<f64> {
    route.windows(2).map(|p| w.get(p[0], p[1]).map(|c| c.0)).sum()
}
