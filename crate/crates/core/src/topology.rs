//! Mesh connectivity graph and the 1-hop / 2-hop neighborhoods derived from it.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Dense node identifier, `0..node_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<usize> for NodeId {
    fn from(v: usize) -> Self {
        NodeId(v)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("node {node} is out of range for a {node_count}-node graph")]
    InvalidNode { node: usize, node_count: usize },
    #[error("self-link on node {0}")]
    SelfLink(usize),
    #[error("duplicate link {0}-{1}")]
    DuplicateLink(usize, usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("topology file line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Immutable simple undirected graph.
///
/// Adjacency lists and 2-hop neighborhoods are computed once at
/// construction and kept sorted by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshGraph {
    node_count: usize,
    links: Vec<(NodeId, NodeId)>,
    adjacency: Vec<Vec<NodeId>>,
    two_hop: Vec<Vec<NodeId>>,
}

impl MeshGraph {
    /// Builds a graph from an undirected link list. Links are normalized to
    /// `(min, max)`; self-links, duplicates and out-of-range ids are rejected.
    pub fn new(node_count: usize, links: &[(usize, usize)]) -> Result<Self, TopologyError> {
        let mut set = BTreeSet::new();
        for &(a, b) in links {
            for n in [a, b] {
                if n >= node_count {
                    return Err(TopologyError::InvalidNode { node: n, node_count });
                }
            }
            if a == b {
                return Err(TopologyError::SelfLink(a));
            }
            let key = (a.min(b), a.max(b));
            if !set.insert(key) {
                return Err(TopologyError::DuplicateLink(key.0, key.1));
            }
        }

        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &set {
            adjacency[a].push(NodeId(b));
            adjacency[b].push(NodeId(a));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        let two_hop = (0..node_count)
            .map(|k| {
                let mut out = BTreeSet::new();
                for &n1 in &adjacency[k] {
                    out.insert(n1);
                    for &n2 in &adjacency[n1.0] {
                        out.insert(n2);
                    }
                }
                out.remove(&NodeId(k));
                out.into_iter().collect()
            })
            .collect();

        Ok(Self {
            node_count,
            links: set.into_iter().map(|(a, b)| (NodeId(a), NodeId(b))).collect(),
            adjacency,
            two_hop,
        })
    }

    /// `rows x cols` lattice with 4-connectivity; node id = `row * cols + col`.
    pub fn grid(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "grid dimensions must be positive");
        let mut links = Vec::with_capacity(2 * rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let id = r * cols + c;
                if c + 1 < cols {
                    links.push((id, id + 1));
                }
                if r + 1 < rows {
                    links.push((id, id + cols));
                }
            }
        }
        Self::new(rows * cols, &links).expect("lattice links are valid by construction")
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count).map(NodeId)
    }

    /// Links as `(lo, hi)` pairs, sorted.
    pub fn links(&self) -> &[(NodeId, NodeId)] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn contains(&self, k: NodeId) -> bool {
        k.0 < self.node_count
    }

    fn check(&self, k: NodeId) -> Result<(), TopologyError> {
        if self.contains(k) {
            Ok(())
        } else {
            Err(TopologyError::InvalidNode { node: k.0, node_count: self.node_count })
        }
    }

    pub fn neighbors(&self, k: NodeId) -> Result<&[NodeId], TopologyError> {
        self.check(k)?;
        Ok(&self.adjacency[k.0])
    }

    /// Nodes at distance 1 or 2 from `k`, excluding `k`, ascending.
    pub fn two_hop_neighborhood(&self, k: NodeId) -> Result<&[NodeId], TopologyError> {
        self.check(k)?;
        Ok(&self.two_hop[k.0])
    }

    pub fn are_adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.contains(a) && self.adjacency[a.0].binary_search(&b).is_ok()
    }

    /// Hop distances from `src`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, src: NodeId) -> Result<Vec<Option<usize>>, TopologyError> {
        self.check(src)?;
        let mut dist = vec![None; self.node_count];
        dist[src.0] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.0].unwrap_or_default();
            for &v in &self.adjacency[u.0] {
                if dist[v.0].is_none() {
                    dist[v.0] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        Ok(dist)
    }

    /// True iff there is a single connected component (vacuously true when empty).
    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        self.bfs_distances(NodeId(0))
            .map(|d| d.iter().all(Option::is_some))
            .unwrap_or(false)
    }

    pub fn ensure_connected(&self) -> Result<(), TopologyError> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(TopologyError::Disconnected)
        }
    }

    /// Serializes to the `nodes N` / `link A B` text format.
    pub fn to_topology_string(&self) -> String {
        let mut out = format!("nodes {}\n", self.node_count);
        for (a, b) in &self.links {
            out.push_str(&format!("link {a} {b}\n"));
        }
        out
    }
}

impl FromStr for MeshGraph {
    type Err = TopologyError;

    /// Parses `nodes N` followed by `link A B` lines. Blank lines and `#`
    /// comments are ignored.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut node_count = None;
        let mut links = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: &str| TopologyError::Parse { line: line_no, msg: msg.to_string() };
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("nodes") => {
                    if node_count.is_some() {
                        return Err(parse_err("repeated `nodes` line"));
                    }
                    let n = parts
                        .next()
                        .and_then(|t| t.parse::<usize>().ok())
                        .ok_or_else(|| parse_err("expected `nodes N`"))?;
                    node_count = Some(n);
                }
                Some("link") => {
                    if node_count.is_none() {
                        return Err(parse_err("`link` before `nodes`"));
                    }
                    let mut ends = parts.by_ref().take(2).map(|t| t.parse::<usize>());
                    match (ends.next(), ends.next()) {
                        (Some(Ok(a)), Some(Ok(b))) => links.push((a, b)),
                        _ => return Err(parse_err("expected `link A B`")),
                    }
                }
                Some(other) => return Err(parse_err(&format!("unknown directive `{other}`"))),
                None => unreachable!(),
            }
            if parts.next().is_some() {
                return Err(parse_err("trailing tokens"));
            }
        }
        let n = node_count.ok_or(TopologyError::Parse { line: 0, msg: "missing `nodes` line".into() })?;
        MeshGraph::new(n, &links)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    #[test]
    fn grid_sizes() {
        let g = MeshGraph::grid(1, 1);
        assert_eq!((g.node_count(), g.link_count()), (1, 0));
        let g = MeshGraph::grid(3, 3);
        assert_eq!((g.node_count(), g.link_count()), (9, 12));
        let g = MeshGraph::grid(2, 4);
        assert_eq!((g.node_count(), g.link_count()), (8, 10));
        assert!(g.are_adjacent(NodeId(1), NodeId(5)));
        assert!(!g.are_adjacent(NodeId(0), NodeId(5)));
    }

    #[test]
    fn two_hop_examples() {
        let g = MeshGraph::new(1, &[]).unwrap();
        assert!(g.two_hop_neighborhood(NodeId(0)).unwrap().is_empty());

        let path = MeshGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.two_hop_neighborhood(NodeId(0)).unwrap(), ids(&[1, 2]));

        let g = MeshGraph::grid(3, 3);
        assert_eq!(g.two_hop_neighborhood(NodeId(0)).unwrap(), ids(&[1, 2, 3, 4, 6]));
        assert_eq!(g.two_hop_neighborhood(NodeId(4)).unwrap(), ids(&[0, 1, 2, 3, 5, 6, 7, 8]));

        assert_eq!(
            g.two_hop_neighborhood(NodeId(9)),
            Err(TopologyError::InvalidNode { node: 9, node_count: 9 })
        );
    }

    #[test]
    fn connectivity() {
        assert!(MeshGraph::grid(3, 3).is_connected());
        assert!(!MeshGraph::new(2, &[]).unwrap().is_connected());
        assert!(MeshGraph::new(1, &[]).unwrap().is_connected());
        assert!(MeshGraph::new(0, &[]).unwrap().is_connected());
    }

    #[test]
    fn rejects_bad_links() {
        assert_eq!(MeshGraph::new(3, &[(1, 1)]), Err(TopologyError::SelfLink(1)));
        assert_eq!(MeshGraph::new(3, &[(0, 1), (1, 0)]), Err(TopologyError::DuplicateLink(0, 1)));
        assert!(matches!(MeshGraph::new(3, &[(0, 3)]), Err(TopologyError::InvalidNode { .. })));
    }

    #[test]
    fn topology_file_parse() {
        let g: MeshGraph = "# ring\nnodes 4\nlink 0 1\nlink 1 2\n\nlink 2 3\nlink 3 0\n".parse().unwrap();
        assert_eq!(g.link_count(), 4);
        assert!(g.is_connected());
        let back: MeshGraph = g.to_topology_string().parse().unwrap();
        assert_eq!(back, g);

        assert!(matches!("link 0 1\n".parse::<MeshGraph>(), Err(TopologyError::Parse { line: 1, .. })));
        assert!(matches!("nodes 2\nlink 0\n".parse::<MeshGraph>(), Err(TopologyError::Parse { line: 2, .. })));
        assert!(matches!("nodes 2\nedge 0 1\n".parse::<MeshGraph>(), Err(TopologyError::Parse { .. })));
    }

    fn arb_graph() -> impl Strategy<Value = MeshGraph> {
        (1usize..14).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |pairs| {
                let links: BTreeSet<_> =
                    pairs.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect();
                MeshGraph::new(n, &links.into_iter().collect::<Vec<_>>()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn two_hop_is_symmetric_and_bounded(g in arb_graph()) {
            for k in g.nodes() {
                let nk = g.two_hop_neighborhood(k).unwrap();
                prop_assert!(nk.len() < g.node_count());
                prop_assert!(!nk.contains(&k));
                for &j in nk {
                    prop_assert!(g.two_hop_neighborhood(j).unwrap().contains(&k));
                }
                let dist = g.bfs_distances(k).unwrap();
                let expected: Vec<NodeId> = g.nodes()
                    .filter(|j| matches!(dist[j.0], Some(1) | Some(2)))
                    .collect();
                prop_assert_eq!(nk, &expected[..]);
            }
        }

        #[test]
        fn grids_are_connected(rows in 1usize..9, cols in 1usize..9) {
            let g = MeshGraph::grid(rows, cols);
            prop_assert!(g.is_connected());
            prop_assert_eq!(g.link_count(), 2 * rows * cols - rows - cols);
        }
    }
}
