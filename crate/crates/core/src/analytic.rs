//! Expected contention and transmission-interval model of the distributed
//! coordinated scheduler.
//!
//! Each node `k` holds off for `2^(x_k + base)` transmission opportunities
//! after a successful control transmission and then contends with its 2-hop
//! neighborhood. The expected number of contention slots `E[S_k]` is the
//! solution of a coupled fixed-point system which is solved here by Jacobi
//! iteration; the expected interval between transmissions is
//! `E[tau_k] = 2^(x_k + base) + E[S_k]`.

use thiserror::Error;

use crate::topology::{MeshGraph, NodeId};

/// Largest exponent representable in the 3-bit holdoff field.
pub const MAX_EXPONENT: u8 = 7;
pub const DEFAULT_BASE: u32 = 4;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("holdoff exponent {exponent} of node {node} outside [0, {MAX_EXPONENT}]")]
    ExponentOutOfRange { node: usize, exponent: u8 },
    #[error("scheduler config covers {config} nodes but graph has {graph}")]
    SizeMismatch { config: usize, graph: usize },
    #[error("holdoff exponent {0} + base {1} overflows the slot counter")]
    Overflow(u8, u32),
    #[error("invalid solver parameters: {0}")]
    BadParameters(&'static str),
    #[error("neighborhood knowledge for node {0} is inconsistent with the graph")]
    BadKnowledge(usize),
    #[error("fixed-point iteration diverged at iteration {0}")]
    Diverged(usize),
}

/// `2^(x + base)` transmission opportunities.
pub fn holdoff_time(x: u8, base: u32) -> Result<u64, AnalyticError> {
    if x > MAX_EXPONENT {
        return Err(AnalyticError::ExponentOutOfRange { node: 0, exponent: x });
    }
    let shift = u32::from(x) + base;
    if shift >= 63 {
        return Err(AnalyticError::Overflow(x, base));
    }
    Ok(1u64 << shift)
}

/// `E[tau] = 2^(x + base) + E[S]`.
pub fn expected_interval(x: u8, es: f64, base: u32) -> Result<f64, AnalyticError> {
    Ok(holdoff_time(x, base)? as f64 + es)
}

/// Per-node holdoff exponents plus the shared base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulerConfig {
    pub base: u32,
    pub exponents: Vec<u8>,
}

impl SchedulerConfig {
    pub fn uniform(node_count: usize, exponent: u8) -> Self {
        Self { base: DEFAULT_BASE, exponents: vec![exponent; node_count] }
    }

    pub fn with_base(mut self, base: u32) -> Self {
        self.base = base;
        self
    }

    pub fn exponent(&self, k: NodeId) -> u8 {
        self.exponents[k.index()]
    }

    pub fn holdoff(&self, k: NodeId) -> u64 {
        1u64 << (u32::from(self.exponent(k)) + self.base)
    }

    pub fn validate(&self, g: &MeshGraph) -> Result<(), AnalyticError> {
        if self.exponents.len() != g.node_count() {
            return Err(AnalyticError::SizeMismatch { config: self.exponents.len(), graph: g.node_count() });
        }
        for (node, &exponent) in self.exponents.iter().enumerate() {
            if exponent > MAX_EXPONENT {
                return Err(AnalyticError::ExponentOutOfRange { node, exponent });
            }
        }
        if u32::from(MAX_EXPONENT) + self.base >= 63 {
            return Err(AnalyticError::Overflow(MAX_EXPONENT, self.base));
        }
        Ok(())
    }
}

/// Which 2-hop neighbors have known schedules, per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodKnowledge {
    pub known: Vec<Vec<NodeId>>,
    pub unknown_count: Vec<usize>,
}

impl NeighborhoodKnowledge {
    /// Every 2-hop neighbor known, none unknown.
    pub fn full(g: &MeshGraph) -> Self {
        let known = g
            .nodes()
            .map(|k| g.two_hop_neighborhood(k).expect("node in range").to_vec())
            .collect();
        Self { known, unknown_count: vec![0; g.node_count()] }
    }

    pub fn validate(&self, g: &MeshGraph) -> Result<(), AnalyticError> {
        if self.known.len() != g.node_count() || self.unknown_count.len() != g.node_count() {
            return Err(AnalyticError::SizeMismatch { config: self.known.len(), graph: g.node_count() });
        }
        for k in g.nodes() {
            let n2 = g.two_hop_neighborhood(k).expect("node in range");
            let known = &self.known[k.index()];
            let distinct = known.iter().collect::<std::collections::BTreeSet<_>>().len() == known.len();
            if !distinct
                || known.iter().any(|j| *j == k || n2.binary_search(j).is_err())
                || known.len() + self.unknown_count[k.index()] > n2.len()
            {
                return Err(AnalyticError::BadKnowledge(k.index()));
            }
        }
        Ok(())
    }
}

/// Solution of the contention fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedSchedule {
    pub es: Vec<f64>,
    pub etau: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Precomputed per-node terms of the fixed-point right-hand side.
struct System {
    holdoff: Vec<f64>,
    /// Known neighbors with exponent >= own: these contribute a ratio term.
    competing: Vec<Vec<usize>>,
    /// `1 + |known with smaller exponent| + unknown_count`.
    constant: Vec<f64>,
}

impl System {
    fn new(g: &MeshGraph, cfg: &SchedulerConfig, nk: &NeighborhoodKnowledge) -> Self {
        let holdoff = g.nodes().map(|k| cfg.holdoff(k) as f64).collect();
        let mut competing = Vec::with_capacity(g.node_count());
        let mut constant = Vec::with_capacity(g.node_count());
        for k in g.nodes() {
            let xk = cfg.exponent(k);
            let known = &nk.known[k.index()];
            competing.push(known.iter().filter(|&&j| cfg.exponent(j) >= xk).map(|j| j.index()).collect());
            let slower = known.iter().filter(|&&j| cfg.exponent(j) < xk).count();
            constant.push((1 + slower + nk.unknown_count[k.index()]) as f64);
        }
        Self { holdoff, competing, constant }
    }

    fn rhs(&self, k: usize, es: &[f64]) -> f64 {
        let own = self.holdoff[k] + es[k];
        let ratio: f64 = self.competing[k].iter().map(|&j| own / (self.holdoff[j] + es[j])).sum();
        ratio + self.constant[k]
    }
}

/// Solves for `E[S_k]` with Jacobi iteration from the analytic lower bound.
///
/// Stops when the max-norm change between successive iterates drops below
/// `tol`; if `max_iter` is exhausted the last iterate is returned with
/// `converged == false`.
pub fn solve_expected_contention(
    g: &MeshGraph,
    cfg: &SchedulerConfig,
    nk: &NeighborhoodKnowledge,
    tol: f64,
    max_iter: usize,
) -> Result<ExpectedSchedule, AnalyticError> {
    if tol.is_nan() || tol <= 0.0 || max_iter == 0 {
        return Err(AnalyticError::BadParameters("tol must be > 0 and max_iter >= 1"));
    }
    cfg.validate(g)?;
    nk.validate(g)?;

    let sys = System::new(g, cfg, nk);
    let n = g.node_count();
    let mut es = sys.constant.clone();
    let mut next = vec![0.0; n];
    let mut converged = n == 0;
    let mut iterations = 0;

    while !converged && iterations < max_iter {
        iterations += 1;
        let mut delta = 0.0f64;
        for k in 0..n {
            let v = sys.rhs(k, &es);
            if !v.is_finite() {
                return Err(AnalyticError::Diverged(iterations));
            }
            delta = delta.max((v - es[k]).abs());
            next[k] = v;
        }
        std::mem::swap(&mut es, &mut next);
        converged = delta < tol;
    }

    let etau = es.iter().zip(&sys.holdoff).map(|(s, h)| h + s).collect();
    Ok(ExpectedSchedule { es, etau, converged, iterations })
}

/// Convenience wrapper: full knowledge, default tolerance and iteration cap.
pub fn solve_default(g: &MeshGraph, cfg: &SchedulerConfig) -> Result<ExpectedSchedule, AnalyticError> {
    solve_expected_contention(g, cfg, &NeighborhoodKnowledge::full(g), DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)
}

/// Max-norm residual `|rhs(E[S]) - E[S]|` of a candidate solution.
pub fn fixed_point_residual(g: &MeshGraph, cfg: &SchedulerConfig, nk: &NeighborhoodKnowledge, es: &[f64]) -> f64 {
    let sys = System::new(g, cfg, nk);
    (0..g.node_count()).map(|k| (sys.rhs(k, es) - es[k]).abs()).fold(0.0, f64::max)
}
