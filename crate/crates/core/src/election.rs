//! Slot-by-slot pseudo-random election for control transmission opportunities.
//!
//! Every eligible node draws a deterministic mixing value for the slot and
//! wins iff its value is the strict maximum among eligible nodes in its 2-hop
//! neighborhood (ties go to the smaller id). A winner holds off for
//! `2^(x + base)` slots before contending again; a loser re-contends on the
//! next slot.

use thiserror::Error;

use crate::analytic::SchedulerConfig;
use crate::topology::{MeshGraph, NodeId};

/// Global transmission-opportunity counter.
pub type SlotIndex = u64;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX2: u64 = 0x94D0_49BB_1331_11EB;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(MIX1);
    z ^= z >> 27;
    z = z.wrapping_mul(MIX2);
    z ^= z >> 31;
    z
}

/// Election draw of `node` in `slot`.
#[inline]
pub fn mixing_value(node: NodeId, slot: SlotIndex) -> u32 {
    let a = (node.index() as u64).wrapping_add(1).wrapping_mul(GOLDEN);
    let b = slot.wrapping_add(1).wrapping_mul(MIX1);
    (mix64(a ^ b) >> 32) as u32
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElectionError {
    #[error("node {node} has {wins} wins; at least 2 are needed for an interval")]
    TooFewWins { node: usize, wins: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionState {
    pub next_eligible: Vec<SlotIndex>,
    pub win_history: Vec<Vec<SlotIndex>>,
}

impl ElectionState {
    pub fn new(node_count: usize) -> Self {
        Self { next_eligible: vec![0; node_count], win_history: vec![Vec::new(); node_count] }
    }

    #[inline]
    pub fn is_eligible(&self, k: NodeId, s: SlotIndex) -> bool {
        self.next_eligible[k.index()] <= s
    }
}

/// `{k}` plus every eligible node in `k`'s 2-hop neighborhood.
pub fn contenders(g: &MeshGraph, st: &ElectionState, k: NodeId, s: SlotIndex) -> Vec<NodeId> {
    let n2 = g.two_hop_neighborhood(k).expect("contender node in range");
    let mut out: Vec<NodeId> = std::iter::once(k).chain(n2.iter().copied().filter(|&j| st.is_eligible(j, s))).collect();
    out.sort_unstable();
    out
}

/// Incremental election driver. Slots must be stepped in increasing order.
#[derive(Debug, Clone)]
pub struct Election<'g> {
    graph: &'g MeshGraph,
    holdoff: Vec<u64>,
    state: ElectionState,
    last_slot: Option<SlotIndex>,
    draws: Vec<u32>,
}

impl<'g> Election<'g> {
    pub fn new(graph: &'g MeshGraph, cfg: &SchedulerConfig) -> Self {
        let holdoff = graph.nodes().map(|k| cfg.holdoff(k)).collect();
        Self {
            graph,
            holdoff,
            state: ElectionState::new(graph.node_count()),
            last_slot: None,
            draws: vec![0; graph.node_count()],
        }
    }

    pub fn state(&self) -> &ElectionState {
        &self.state
    }

    pub fn into_state(self) -> ElectionState {
        self.state
    }

    /// Resolves slot `s`, returning winners in ascending id order.
    pub fn step(&mut self, s: SlotIndex) -> Vec<NodeId> {
        assert!(self.last_slot.is_none_or(|prev| s > prev), "slots must strictly increase");
        self.last_slot = Some(s);

        let st = &self.state;
        for k in self.graph.nodes() {
            if st.is_eligible(k, s) {
                self.draws[k.index()] = mixing_value(k, s);
            }
        }

        let mut winners = Vec::new();
        for k in self.graph.nodes() {
            if !st.is_eligible(k, s) {
                continue;
            }
            let mine = (self.draws[k.index()], std::cmp::Reverse(k));
            let beaten = self
                .graph
                .two_hop_neighborhood(k)
                .expect("node in range")
                .iter()
                .filter(|&&j| st.is_eligible(j, s))
                .any(|&j| (self.draws[j.index()], std::cmp::Reverse(j)) > mine);
            if !beaten {
                winners.push(k);
            }
        }

        for &w in &winners {
            self.state.win_history[w.index()].push(s);
            self.state.next_eligible[w.index()] = s + self.holdoff[w.index()] + 1;
        }
        winners
    }
}

/// Winners of each slot `0..total_slots`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionTrace {
    pub winners: Vec<Vec<NodeId>>,
}

impl ElectionTrace {
    /// Win slots of `node`, ascending.
    pub fn wins_of(&self, node: NodeId) -> Vec<SlotIndex> {
        self.winners
            .iter()
            .enumerate()
            .filter(|(_, w)| w.contains(&node))
            .map(|(s, _)| s as SlotIndex)
            .collect()
    }
}

pub fn run_election(g: &MeshGraph, cfg: &SchedulerConfig, total_slots: u64) -> (ElectionTrace, ElectionState) {
    let mut election = Election::new(g, cfg);
    let winners = (0..total_slots).map(|s| election.step(s)).collect();
    (ElectionTrace { winners }, election.into_state())
}

/// Mean gap between successive wins.
pub fn interval_of(wins: &[SlotIndex], node: NodeId) -> Result<f64, ElectionError> {
    if wins.len() < 2 {
        return Err(ElectionError::TooFewWins { node: node.index(), wins: wins.len() });
    }
    Ok((wins[wins.len() - 1] - wins[0]) as f64 / (wins.len() - 1) as f64)
}

pub fn measured_interval(trace: &ElectionTrace, node: NodeId) -> Result<f64, ElectionError> {
    interval_of(&trace.wins_of(node), node)
}

/// Violations found by [`audit`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SafetyReport {
    pub slots_checked: u64,
    /// `(slot, a, b)` with `a`, `b` within 2 hops and both winning.
    pub collisions: Vec<(SlotIndex, NodeId, NodeId)>,
    /// `(node, earlier, later)` wins not separated by more than the holdoff.
    pub holdoff_violations: Vec<(NodeId, SlotIndex, SlotIndex)>,
}

impl SafetyReport {
    pub fn is_clean(&self) -> bool {
        self.collisions.is_empty() && self.holdoff_violations.is_empty()
    }

    pub fn merge(&mut self, other: SafetyReport) {
        self.slots_checked += other.slots_checked;
        self.collisions.extend(other.collisions);
        self.holdoff_violations.extend(other.holdoff_violations);
    }
}

/// Checks 2-hop exclusivity per slot and holdoff spacing per node.
pub fn audit<'a, I>(g: &MeshGraph, cfg: &SchedulerConfig, slots: I) -> SafetyReport
where
    I: IntoIterator<Item = (SlotIndex, &'a [NodeId])>,
{
    let mut report = SafetyReport::default();
    let mut last_win: Vec<Option<SlotIndex>> = vec![None; g.node_count()];
    for (s, winners) in slots {
        report.slots_checked += 1;
        for (i, &a) in winners.iter().enumerate() {
            let n2 = g.two_hop_neighborhood(a).expect("winner in range");
            for &b in &winners[i + 1..] {
                if n2.binary_search(&b).is_ok() {
                    report.collisions.push((s, a, b));
                }
            }
            if let Some(prev) = last_win[a.index()] {
                if s - prev <= cfg.holdoff(a) {
                    report.holdoff_violations.push((a, prev, s));
                }
            }
            last_win[a.index()] = Some(s);
        }
    }
    report
}

pub fn audit_trace(g: &MeshGraph, cfg: &SchedulerConfig, trace: &ElectionTrace) -> SafetyReport {
    audit(g, cfg, trace.winners.iter().enumerate().map(|(s, w)| (s as SlotIndex, w.as_slice())))
}
