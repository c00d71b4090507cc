//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use esd_mesh::metric::{FlowDescriptor, LinkCost, NodeState};
use esd_mesh::routing::LinkWeights;
use esd_mesh::{MeshGraph, NodeId};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random connected graph: a random spanning tree plus extra edges with
/// probability `p`.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, p: f64) -> MeshGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut links = Vec::new();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        links.push((parent.min(order[i]), parent.max(order[i])));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !links.contains(&(a, b)) && rng.random_bool(p) {
                links.push((a, b));
            }
        }
    }
    MeshGraph::new(n, &links).expect("valid random graph")
}

pub fn clique(n: usize) -> MeshGraph {
    let links: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    MeshGraph::new(n, &links).unwrap()
}

/// Small non-negative integer weights (zeros included, so ties are common).
pub fn random_weights<R: Rng>(rng: &mut R, g: &MeshGraph) -> LinkWeights {
    g.links().iter().map(|&l| (l, LinkCost(rng.random_range(0..6) as f64))).collect()
}

/// Array-based Dijkstra over the same undirected weights.
pub fn dijkstra(g: &MeshGraph, w: &LinkWeights, src: NodeId) -> Vec<f64> {
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[src.index()] = 0.0;
    for _ in 0..n {
        let Some(u) = (0..n).filter(|&u| !done[u] && dist[u].is_finite()).min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        else {
            break;
        };
        done[u] = true;
        for &v in g.neighbors(NodeId(u)).unwrap() {
            let c = w.get(NodeId(u), v).unwrap().0;
            if dist[u] + c < dist[v.index()] {
                dist[v.index()] = dist[u] + c;
            }
        }
    }
    dist
}

/// Every simple path from `src` to `dst`.
pub fn simple_paths(g: &MeshGraph, src: NodeId, dst: NodeId) -> Vec<Vec<NodeId>> {
    fn dfs(g: &MeshGraph, dst: NodeId, path: &mut Vec<NodeId>, seen: &mut [bool], out: &mut Vec<Vec<NodeId>>) {
        let u = *path.last().unwrap();
        if u == dst {
            out.push(path.clone());
            return;
        }
        for &v in g.neighbors(u).unwrap() {
            if !seen[v.index()] {
                seen[v.index()] = true;
                path.push(v);
                dfs(g, dst, path, seen, out);
                path.pop();
                seen[v.index()] = false;
            }
        }
    }
    let mut seen = vec![false; g.node_count()];
    seen[src.index()] = true;
    let mut out = Vec::new();
    dfs(g, dst, &mut vec![src], &mut seen, &mut out);
    out
}

pub fn links_cost(w: &LinkWeights, path: &[NodeId]) -> f64 {
    path.windows(2).map(|p| w.get(p[0], p[1]).unwrap().0).sum()
}

/// Best path by exhaustive enumeration under (cost, hops, lexicographic).
pub fn brute_force_best(g: &MeshGraph, w: &LinkWeights, src: NodeId, dst: NodeId) -> Option<(f64, Vec<NodeId>)> {
    let eq = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
    simple_paths(g, src, dst).into_iter().map(|p| (links_cost(w, &p), p)).min_by(|(ca, pa), (cb, pb)| {
        if !eq(*ca, *cb) {
            ca.total_cmp(cb)
        } else {
            pa.len().cmp(&pb.len()).then_with(|| pa.cmp(pb))
        }
    })
}

pub fn is_simple(path: &[NodeId]) -> bool {
    let mut v = path.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len() == path.len()
}

/// 3x3 grid, uniform E[tau] = 18, flowdesc 4 at the center and 1 elsewhere.
pub fn hotspot() -> (MeshGraph, Vec<NodeState>) {
    let g = MeshGraph::grid(3, 3);
    let mut st = vec![NodeState::new(1, 18.0, 0); 9];
    st[4].flowdesc = FlowDescriptor(4);
    (g, st)
}

pub fn ids(v: &[usize]) -> Vec<NodeId> {
    v.iter().copied().map(NodeId).collect()
}
