//! Piggybacked dissemination of per-node `(flowdesc, E[tau], timestamp)` state.
//!
//! Each node keeps a table of the latest state it has heard for every node.
//! When a node wins a control slot it broadcasts up to `capacity` entries:
//! changed ("dirty") entries first, then the least recently advertised
//! entries as anti-entropy filler. Receivers adopt strictly newer entries and
//! mark them dirty so they travel further.

use std::collections::BTreeSet;

use crate::metric::NodeState;
use crate::topology::{MeshGraph, NodeId};

pub const DEFAULT_CAPACITY: usize = 8;

/// One control message's worth of table entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DschMessage {
    pub sender: NodeId,
    pub entries: Vec<(NodeId, NodeState)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    owner: NodeId,
    entries: Vec<Option<NodeState>>,
    dirty: BTreeSet<NodeId>,
    /// Advertisement sequence at which each entry was last sent.
    last_sent: Vec<u64>,
    adverts: u64,
}

impl StateTable {
    pub fn new(owner: NodeId, node_count: usize, own: NodeState) -> Self {
        let mut entries = vec![None; node_count];
        entries[owner.index()] = Some(own);
        Self {
            owner,
            entries,
            dirty: BTreeSet::from([owner]),
            last_sent: vec![0; node_count],
            adverts: 0,
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn get(&self, k: NodeId) -> Option<&NodeState> {
        self.entries.get(k.index()).and_then(Option::as_ref)
    }

    pub fn own(&self) -> &NodeState {
        self.entries[self.owner.index()].as_ref().expect("own entry always present")
    }

    pub fn dirty(&self) -> &BTreeSet<NodeId> {
        &self.dirty
    }

    pub fn known_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.entries.iter().all(Option::is_some)
    }

    /// Full per-node state vector, if every node is known.
    pub fn snapshot(&self) -> Option<Vec<NodeState>> {
        self.entries.iter().copied().collect()
    }

    /// Replaces the owner's own entry and marks it for advertisement.
    pub fn update_own(&mut self, state: NodeState) {
        debug_assert!(state.timestamp >= self.own().timestamp, "own timestamp went backwards");
        self.entries[self.owner.index()] = Some(state);
        self.dirty.insert(self.owner);
    }

    /// Builds the next advertisement and clears the carried entries' dirty marks.
    pub fn build_advertisement(&mut self, capacity: usize) -> DschMessage {
        self.adverts += 1;
        let mut chosen: Vec<NodeId> = Vec::with_capacity(capacity);
        if self.dirty.contains(&self.owner) && capacity > 0 {
            chosen.push(self.owner);
        }
        chosen.extend(self.dirty.iter().copied().filter(|&k| k != self.owner).take(capacity - chosen.len()));

        if chosen.len() < capacity {
            let mut stale: Vec<NodeId> = (0..self.entries.len())
                .map(NodeId)
                .filter(|k| self.entries[k.index()].is_some() && !self.dirty.contains(k))
                .collect();
            stale.sort_by_key(|k| (self.last_sent[k.index()], *k));
            chosen.extend(stale.into_iter().take(capacity - chosen.len()));
        }

        let entries = chosen
            .iter()
            .map(|&k| {
                self.dirty.remove(&k);
                self.last_sent[k.index()] = self.adverts;
                (k, self.entries[k.index()].expect("chosen entries exist"))
            })
            .collect();
        DschMessage { sender: self.owner, entries }
    }

    /// Adopts strictly newer (or previously unknown) entries; returns how many
    /// were adopted. The owner's own entry is never overwritten.
    pub fn merge_advertisement(&mut self, msg: &DschMessage) -> usize {
        let mut adopted = 0;
        for &(k, state) in &msg.entries {
            if k == self.owner || k.index() >= self.entries.len() {
                continue;
            }
            let newer = match &self.entries[k.index()] {
                Some(local) => state.timestamp > local.timestamp,
                None => true,
            };
            if newer {
                self.entries[k.index()] = Some(state);
                self.dirty.insert(k);
                adopted += 1;
            }
        }
        adopted
    }
}

/// True iff every table knows every node and all tables agree entry-wise.
pub fn is_converged(tables: &[StateTable]) -> bool {
    let Some(first) = tables.first() else {
        return true;
    };
    tables.iter().all(|t| t.is_complete() && t.entries == first.entries)
}

/// All nodes' tables plus the broadcast rule over a fixed graph.
#[derive(Debug, Clone)]
pub struct Dissemination {
    tables: Vec<StateTable>,
    capacity: usize,
}

impl Dissemination {
    pub fn new(initial: &[NodeState], capacity: usize) -> Self {
        let n = initial.len();
        let tables = initial.iter().enumerate().map(|(k, &s)| StateTable::new(NodeId(k), n, s)).collect();
        Self { tables, capacity }
    }

    pub fn tables(&self) -> &[StateTable] {
        &self.tables
    }

    pub fn table(&self, k: NodeId) -> &StateTable {
        &self.tables[k.index()]
    }

    pub fn update_own(&mut self, k: NodeId, state: NodeState) {
        self.tables[k.index()].update_own(state);
    }

    /// `winner` advertises to all its 1-hop neighbors. Returns the message.
    pub fn on_win(&mut self, g: &MeshGraph, winner: NodeId) -> DschMessage {
        let msg = self.tables[winner.index()].build_advertisement(self.capacity);
        for &n in g.neighbors(winner).expect("winner in range") {
            self.tables[n.index()].merge_advertisement(&msg);
        }
        msg
    }

    pub fn is_converged(&self) -> bool {
        is_converged(&self.tables)
    }
}
