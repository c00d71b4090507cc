//! Flow descriptors and the Expected Scheduler Delay link/path costs.

use std::fmt;

use thiserror::Error;

use crate::topology::{MeshGraph, NodeId};

/// Number of incoming plus outgoing MAC-level flows at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FlowDescriptor(pub u32);

impl FlowDescriptor {
    pub fn count(self) -> u32 {
        self.0
    }
}

impl fmt::Display for FlowDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Disseminated per-node state: flow load, expected transmission interval,
/// and the frame at which the owner last changed it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeState {
    pub flowdesc: FlowDescriptor,
    pub etau: f64,
    pub timestamp: u64,
}

impl NodeState {
    pub fn new(flowdesc: u32, etau: f64, timestamp: u64) -> Self {
        Self { flowdesc: FlowDescriptor(flowdesc), etau, timestamp }
    }

    /// Flow-weighted expected wait, `E[tau] * flowdesc`.
    #[inline]
    pub fn load(&self) -> f64 {
        self.etau * f64::from(self.flowdesc.0)
    }
}

/// Non-negative link weight in slots.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct LinkCost(pub f64);

impl LinkCost {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("path needs at least 2 nodes, got {0}")]
    PathTooShort(usize),
    #[error("consecutive path nodes {0} and {1} are not adjacent")]
    NonAdjacent(NodeId, NodeId),
    #[error("flow descriptor underflow at node {0}")]
    Underflow(NodeId),
    #[error("no state for node {0}")]
    MissingState(NodeId),
}

/// ESD of the link `a`–`b`: mean of the flow-weighted waits at both ends.
#[inline]
pub fn esd_link(a: &NodeState, b: &NodeState) -> LinkCost {
    LinkCost((a.load() + b.load()) / 2.0)
}

fn check_path(g: &MeshGraph, path: &[NodeId], states: &[NodeState]) -> Result<(), MetricError> {
    if path.len() < 2 {
        return Err(MetricError::PathTooShort(path.len()));
    }
    if let Some(&k) = path.iter().find(|k| k.index() >= states.len()) {
        return Err(MetricError::MissingState(k));
    }
    for w in path.windows(2) {
        if !g.are_adjacent(w[0], w[1]) {
            return Err(MetricError::NonAdjacent(w[0], w[1]));
        }
    }
    Ok(())
}

/// End-to-end expected scheduler delay: every node's flow-weighted wait counted
/// once, source and sink included at full weight.
pub fn path_cost(g: &MeshGraph, path: &[NodeId], states: &[NodeState]) -> Result<f64, MetricError> {
    check_path(g, path, states)?;
    Ok(path.iter().map(|k| states[k.index()].load()).sum())
}

/// Same quantity as [`path_cost`], summed link by link with the endpoint
/// halves added back.
pub fn path_cost_by_links(g: &MeshGraph, path: &[NodeId], states: &[NodeState]) -> Result<f64, MetricError> {
    check_path(g, path, states)?;
    let links: f64 = path.windows(2).map(|w| esd_link(&states[w[0].index()], &states[w[1].index()]).0).sum();
    let ends = (states[path[0].index()].load() + states[path[path.len() - 1].index()].load()) / 2.0;
    Ok(links + ends)
}

/// Admission (`+1`) or teardown (`-1`) of one flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowDelta {
    Admit,
    Teardown,
}

/// Updates flow descriptors along `route`: endpoints change by one,
/// relays by two (the flow enters and leaves them).
///
/// On underflow nothing is modified.
pub fn apply_flow(fd: &mut [FlowDescriptor], route: &[NodeId], delta: FlowDelta) -> Result<(), MetricError> {
    let last = route.len().saturating_sub(1);
    let weight = |i: usize| if i == 0 || i == last { 1 } else { 2 };
    if delta == FlowDelta::Teardown {
        if let Some((_, &k)) = route.iter().enumerate().find(|&(i, k)| fd[k.index()].0 < weight(i)) {
            return Err(MetricError::Underflow(k));
        }
    }
    for (i, k) in route.iter().enumerate() {
        let slot = &mut fd[k.index()].0;
        match delta {
            FlowDelta::Admit => *slot += weight(i),
            FlowDelta::Teardown => *slot -= weight(i),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().copied().map(NodeId).collect()
    }

    fn uniform(n: usize, fd: u32, etau: f64) -> Vec<NodeState> {
        vec![NodeState::new(fd, etau, 0); n]
    }

    #[test]
    fn esd_link_examples() {
        let idle = NodeState::new(0, 18.0, 0);
        assert_eq!(esd_link(&idle, &idle), LinkCost(0.0));
        let a = NodeState::new(3, 18.0, 0);
        assert_eq!(esd_link(&a, &a), LinkCost(54.0));
        let a = NodeState::new(2, 578.0 / 33.0, 0);
        let b = NodeState::new(1, 34.0, 0);
        let expected = (1156.0 / 33.0 + 34.0) / 2.0;
        assert!((esd_link(&a, &b).0 - expected).abs() < 1e-12);
        assert!((esd_link(&a, &b).0 - 34.5152).abs() < 1e-4);
    }

    #[test]
    fn path_cost_examples() {
        let pair = MeshGraph::new(2, &[(0, 1)]).unwrap();
        assert_eq!(path_cost(&pair, &ids(&[0, 1]), &uniform(2, 1, 18.0)), Ok(36.0));
        let line = MeshGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path_cost(&line, &ids(&[0, 1, 2]), &uniform(3, 1, 18.0)), Ok(54.0));

        let g = MeshGraph::grid(3, 3);
        let mut st = uniform(9, 1, 18.0);
        st[4].flowdesc = FlowDescriptor(4);
        assert_eq!(path_cost(&g, &ids(&[0, 1, 4, 7, 8]), &st), Ok(144.0));
        assert_eq!(path_cost(&g, &ids(&[0, 1, 2, 5, 8]), &st), Ok(90.0));
        assert_eq!(path_cost_by_links(&g, &ids(&[0, 1, 2, 5, 8]), &st), Ok(90.0));
    }

    #[test]
    fn path_cost_errors() {
        let g = MeshGraph::grid(3, 3);
        let st = uniform(9, 1, 18.0);
        assert_eq!(path_cost(&g, &ids(&[0]), &st), Err(MetricError::PathTooShort(1)));
        assert_eq!(path_cost(&g, &ids(&[0, 4]), &st), Err(MetricError::NonAdjacent(NodeId(0), NodeId(4))));
        assert_eq!(path_cost(&g, &ids(&[0, 1]), &st[..1]), Err(MetricError::MissingState(NodeId(1))));
    }

    #[test]
    fn flow_accounting() {
        let mut fd = vec![FlowDescriptor(0); 5];
        apply_flow(&mut fd, &ids(&[0, 1]), FlowDelta::Admit).unwrap();
        assert_eq!(fd[..2], [FlowDescriptor(1), FlowDescriptor(1)]);

        let mut fd = vec![FlowDescriptor(0); 5];
        apply_flow(&mut fd, &ids(&[0, 1, 2, 3]), FlowDelta::Admit).unwrap();
        assert_eq!(fd.iter().map(|f| f.0).collect::<Vec<_>>(), vec![1, 2, 2, 1, 0]);
        apply_flow(&mut fd, &ids(&[0, 1, 2, 3]), FlowDelta::Teardown).unwrap();
        assert!(fd.iter().all(|f| f.0 == 0));

        let before = fd.clone();
        assert_eq!(apply_flow(&mut fd, &ids(&[4, 3]), FlowDelta::Teardown), Err(MetricError::Underflow(NodeId(4))));
        assert_eq!(fd, before);
    }

    fn arb_state() -> impl Strategy<Value = NodeState> {
        (0u32..20, 1.0f64..300.0).prop_map(|(fd, etau)| NodeState::new(fd, etau, 0))
    }

    fn ulp_distance(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    proptest! {
        #[test]
        fn esd_link_symmetric_and_monotone(a in arb_state(), b in arb_state(), dfd in 0u32..5, detau in 0.0f64..50.0) {
            prop_assert_eq!(esd_link(&a, &b), esd_link(&b, &a));
            let mut a2 = a;
            a2.flowdesc.0 += dfd;
            a2.etau += detau;
            prop_assert!(esd_link(&a2, &b).0 >= esd_link(&a, &b).0);
            prop_assert!(esd_link(&a, &b).0 >= 0.0);
        }

        #[test]
        fn two_path_formulations_agree(len in 2usize..12, states in proptest::collection::vec(arb_state(), 12)) {
            let links: Vec<_> = (0..11).map(|i| (i, i + 1)).collect();
            let g = MeshGraph::new(12, &links).unwrap();
            let path: Vec<NodeId> = (0..len).map(NodeId).collect();
            let a = path_cost(&g, &path, &states).unwrap();
            let b = path_cost_by_links(&g, &path, &states).unwrap();
            prop_assert!(ulp_distance(a, b) <= 4, "{a} vs {b}");
        }

        #[test]
        fn admit_then_teardown_is_identity(start in proptest::collection::vec(0u32..5, 8), len in 2usize..8) {
            let mut fd: Vec<_> = start.iter().copied().map(FlowDescriptor).collect();
            let route: Vec<NodeId> = (0..len).map(NodeId).collect();
            apply_flow(&mut fd, &route, FlowDelta::Admit).unwrap();
            apply_flow(&mut fd, &route, FlowDelta::Teardown).unwrap();
            prop_assert_eq!(fd.iter().map(|f| f.0).collect::<Vec<_>>(), start);
        }
    }
}
