//! Frame/slot discrete-event simulator.
//!
//! Time advances in frames of `control_slots_per_frame` transmission
//! opportunities. In every slot the election picks winners; each winner
//! broadcasts a state advertisement to its 1-hop neighbors and forwards up to
//! `burst` queued packets, served fair round-robin across its per-flow
//! queues. A forwarded packet reaches the next hop at the end of the slot.
//!
//! A traffic-free warm-up runs until every state table is complete and
//! consistent; flows are then admitted at their start frames with a route
//! computed from the source's table, and pinned for their lifetime.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::analytic::{self, AnalyticError, SchedulerConfig};
use crate::dissemination::{self, Dissemination};
use crate::election::{Election, SlotIndex};
use crate::metric::{apply_flow, FlowDelta, FlowDescriptor, MetricError, NodeState};
use crate::routing::{self, MetricKind, RoutingError, SourceRoute};
use crate::topology::{MeshGraph, NodeId, TopologyError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid timing: {0}")]
    InvalidTiming(&'static str),
    #[error("flow {id}: {reason}")]
    InvalidFlow { id: FlowId, reason: String },
    #[error("contention model did not converge in {0} iterations")]
    ModelNotConverged(usize),
    #[error("state dissemination not converged after {0} warm-up frames; ESD routes need complete tables")]
    WarmupExhausted(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingConfig {
    pub frame_ms: f64,
    pub control_slots_per_frame: u32,
    /// Packets a node may forward per election win.
    pub burst: usize,
    /// Per-flow queue capacity at each node, in packets.
    pub queue_capacity: usize,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self { frame_ms: 10.0, control_slots_per_frame: 16, burst: 16, queue_capacity: 512 }
    }
}

impl TimingConfig {
    pub fn slot_ms(&self) -> f64 {
        self.frame_ms / f64::from(self.control_slots_per_frame)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.frame_ms > 0.0 && self.frame_ms.is_finite()) {
            return Err(EngineError::InvalidTiming("frame_ms must be positive"));
        }
        if self.control_slots_per_frame == 0 {
            return Err(EngineError::InvalidTiming("control_slots_per_frame must be positive"));
        }
        if self.burst == 0 {
            return Err(EngineError::InvalidTiming("burst must be positive"));
        }
        if self.queue_capacity == 0 {
            return Err(EngineError::InvalidTiming("queue_capacity must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlowKind {
    OneWay,
    /// Request/response pairs; the response retraces the request route.
    RttProbe,
}

/// Traffic source. Frames are counted from the end of warm-up.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: FlowId,
    pub src: NodeId,
    pub dst: NodeId,
    /// Packets per frame; fractional rates accumulate across frames.
    pub rate: f64,
    pub packet_bytes: u32,
    pub start_frame: u64,
    pub stop_frame: u64,
    pub kind: FlowKind,
}

impl FlowSpec {
    fn validate(&self, g: &MeshGraph) -> Result<(), EngineError> {
        let bad = |reason: &str| Err(EngineError::InvalidFlow { id: self.id, reason: reason.to_string() });
        if !g.contains(self.src) || !g.contains(self.dst) {
            return bad("endpoint outside the graph");
        }
        if self.src == self.dst {
            return bad("source equals destination");
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad("rate must be positive");
        }
        if self.start_frame >= self.stop_frame {
            return bad("start_frame must precede stop_frame");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Per-node queue identity.
pub type QueueKey = (FlowId, Direction);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub flow: FlowId,
    pub dir: Direction,
    pub created_at: SlotIndex,
    /// Creation slot of the request a response answers; equals `created_at` otherwise.
    pub origin_at: SlotIndex,
    /// Index of the current holder in the route.
    pub hop_index: usize,
}

/// Per-flow FIFO queues at one node, served one packet per non-empty queue
/// per round in flow order. The round-robin position survives across calls.
#[derive(Debug, Clone, Default)]
pub struct FairQueues {
    queues: BTreeMap<QueueKey, VecDeque<Packet>>,
    cursor: Option<QueueKey>,
    capacity: usize,
}

impl FairQueues {
    pub fn new(capacity: usize) -> Self {
        Self { queues: BTreeMap::new(), cursor: None, capacity }
    }

    /// Appends `p`; returns it back if its queue is full.
    pub fn push(&mut self, p: Packet) -> Result<(), Packet> {
        let q = self.queues.entry((p.flow, p.dir)).or_default();
        if q.len() >= self.capacity {
            return Err(p);
        }
        q.push_back(p);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.queues.is_empty()
    }

    pub fn queue_len(&self, key: QueueKey) -> usize {
        self.queues.get(&key).map_or(0, VecDeque::len)
    }

    fn next_key(&self) -> Option<QueueKey> {
        use std::ops::Bound::{Excluded, Unbounded};
        let after = match self.cursor {
            Some(c) => self.queues.range((Excluded(c), Unbounded)).next(),
            None => None,
        };
        after.or_else(|| self.queues.iter().next()).map(|(k, _)| *k)
    }

    /// Dequeues up to `burst` packets in round-robin order.
    pub fn serve(&mut self, burst: usize) -> Vec<Packet> {
        let mut out = Vec::with_capacity(burst.min(self.len()));
        while out.len() < burst {
            let Some(key) = self.next_key() else { break };
            let q = self.queues.get_mut(&key).expect("key from map");
            out.push(q.pop_front().expect("empty queues are removed"));
            if q.is_empty() {
                self.queues.remove(&key);
            }
            self.cursor = Some(key);
        }
        out
    }
}

/// Fate of one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub packet: u64,
    pub flow: FlowId,
    pub dir: Direction,
    pub created_at: SlotIndex,
    pub delivered_at: Option<SlotIndex>,
    pub dropped: bool,
    pub hops: usize,
    pub route_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Win { frame: u64, slot: SlotIndex, node: NodeId },
    Advertise { frame: u64, slot: SlotIndex, node: NodeId, entries: usize },
    Admit { frame: u64, flow: FlowId, route: SourceRoute },
    Teardown { frame: u64, flow: FlowId },
    Create { frame: u64, slot: SlotIndex, node: NodeId, flow: FlowId, pkt: u64 },
    Forward { frame: u64, slot: SlotIndex, node: NodeId, flow: FlowId, pkt: u64, next: NodeId },
    Deliver { frame: u64, slot: SlotIndex, node: NodeId, flow: FlowId, pkt: u64, delay_slots: u64 },
    Drop { frame: u64, slot: SlotIndex, node: NodeId, flow: FlowId, pkt: u64 },
}

impl TraceEvent {
    pub const HEADER: &'static str = "event,frame,slot,node,flow,pkt,detail";
}

impl fmt::Display for TraceEvent {
    /// One `event,frame,slot,node,flow,pkt,detail` line; absent fields are empty.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Win { frame, slot, node } => write!(f, "win,{frame},{slot},{node},,,"),
            TraceEvent::Advertise { frame, slot, node, entries } => {
                write!(f, "adv,{frame},{slot},{node},,,entries={entries}")
            }
            TraceEvent::Admit { frame, flow, route } => write!(f, "admit,{frame},,{},{flow},,route={route}", route.source()),
            TraceEvent::Teardown { frame, flow } => write!(f, "teardown,{frame},,,{flow},,"),
            TraceEvent::Create { frame, slot, node, flow, pkt } => write!(f, "create,{frame},{slot},{node},{flow},{pkt},"),
            TraceEvent::Forward { frame, slot, node, flow, pkt, next } => {
                write!(f, "fwd,{frame},{slot},{node},{flow},{pkt},next={next}")
            }
            TraceEvent::Deliver { frame, slot, node, flow, pkt, delay_slots } => {
                write!(f, "deliver,{frame},{slot},{node},{flow},{pkt},delay_slots={delay_slots}")
            }
            TraceEvent::Drop { frame, slot, node, flow, pkt } => write!(f, "drop,{frame},{slot},{node},{flow},{pkt},"),
        }
    }
}

/// Everything a single run needs.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub graph: MeshGraph,
    pub sched: SchedulerConfig,
    pub timing: TimingConfig,
    pub flows: Vec<FlowSpec>,
    pub metric: MetricKind,
    /// Traffic-phase length in frames.
    pub total_frames: u64,
    /// Upper bound on warm-up frames.
    pub warmup_cap: u64,
    /// Table entries per control message.
    pub ad_capacity: usize,
    pub record_trace: bool,
}

impl Scenario {
    pub fn new(graph: MeshGraph, sched: SchedulerConfig, flows: Vec<FlowSpec>, metric: MetricKind, total_frames: u64) -> Self {
        Self {
            graph,
            sched,
            timing: TimingConfig::default(),
            flows,
            metric,
            total_frames,
            warmup_cap: 500,
            ad_capacity: dissemination::DEFAULT_CAPACITY,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub metric: MetricKind,
    pub frames: u64,
    pub warmup_frames: u64,
    pub slot_ms: f64,
    pub frame_ms: f64,
    /// One-way data packets only.
    pub mean_delay_ms: f64,
    pub p95_delay_ms: f64,
    /// NaN when no probe completed.
    pub mean_rtt_ms: f64,
    pub rtt_samples: usize,
    /// Delivered one-way payload bits per second of traffic phase.
    pub throughput_bps: f64,
    pub data_delivered: u64,
    /// All packets, including probe requests and responses.
    pub created: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_queue: u64,
    pub mean_hops: f64,
    pub peak_flowdesc: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: MetricsReport,
    pub routes: BTreeMap<FlowId, SourceRoute>,
    pub packets: Vec<PacketRecord>,
    /// Non-empty election outcomes, warm-up included.
    pub wins: Vec<(SlotIndex, Vec<NodeId>)>,
    pub rtt_slots: Vec<u64>,
    /// Slot at which warm-up ended.
    pub traffic_start_slot: SlotIndex,
    pub trace: Vec<TraceEvent>,
}

struct FlowState {
    spec: FlowSpec,
    forward: Option<SourceRoute>,
    reverse: Option<SourceRoute>,
    active: bool,
    credit: f64,
}

impl FlowState {
    fn route(&self, dir: Direction) -> &SourceRoute {
        match dir {
            Direction::Forward => self.forward.as_ref(),
            Direction::Reverse => self.reverse.as_ref(),
        }
        .expect("packets only exist for admitted flows")
    }
}

struct Sim<'a> {
    sc: &'a Scenario,
    election: Election<'a>,
    diss: Dissemination,
    etau: Vec<f64>,
    fd: Vec<FlowDescriptor>,
    peak_fd: Vec<u32>,
    queues: Vec<FairQueues>,
    flows: Vec<FlowState>,
    records: Vec<PacketRecord>,
    wins: Vec<(SlotIndex, Vec<NodeId>)>,
    rtt_slots: Vec<u64>,
    trace: Vec<TraceEvent>,
}

impl<'a> Sim<'a> {
    fn slots_per_frame(&self) -> u64 {
        u64::from(self.sc.timing.control_slots_per_frame)
    }

    fn log(&mut self, ev: impl FnOnce() -> TraceEvent) {
        if self.sc.record_trace {
            self.trace.push(ev());
        }
    }

    fn run_slot(&mut self, frame: u64, s: SlotIndex) {
        let winners = self.election.step(s);
        if winners.is_empty() {
            return;
        }
        for &w in &winners {
            self.log(|| TraceEvent::Win { frame, slot: s, node: w });
            let msg = self.diss.on_win(&self.sc.graph, w);
            let entries = msg.entries.len();
            self.log(|| TraceEvent::Advertise { frame, slot: s, node: w, entries });
            let batch = self.queues[w.index()].serve(self.sc.timing.burst);
            for p in batch {
                self.forward(frame, s, w, p);
            }
        }
        self.wins.push((s, winners));
    }

    fn forward(&mut self, frame: u64, s: SlotIndex, node: NodeId, mut p: Packet) {
        let flow = &self.flows[p.flow.0 as usize];
        let route = flow.route(p.dir);
        debug_assert_eq!(route[p.hop_index], node, "packet served off its route");
        let next = route[p.hop_index + 1];
        let at_end = p.hop_index + 2 == route.len();
        let kind = flow.spec.kind;
        p.hop_index += 1;
        self.log(|| TraceEvent::Forward { frame, slot: s, node, flow: p.flow, pkt: p.id, next });
        let rec = &mut self.records[p.id as usize];
        rec.hops = p.hop_index;

        let arrival = s + 1;
        if !at_end {
            self.enqueue(frame, s, next, p);
            return;
        }

        rec.delivered_at = Some(arrival);
        let delay_slots = arrival - p.created_at;
        self.log(|| TraceEvent::Deliver { frame, slot: s, node: next, flow: p.flow, pkt: p.id, delay_slots });
        match (kind, p.dir) {
            (FlowKind::RttProbe, Direction::Forward) => {
                let resp = self.new_packet(p.flow, Direction::Reverse, arrival, p.created_at);
                self.log(|| TraceEvent::Create { frame, slot: s, node: next, flow: resp.flow, pkt: resp.id });
                self.enqueue(frame, s, next, resp);
            }
            (FlowKind::RttProbe, Direction::Reverse) => self.rtt_slots.push(arrival - p.origin_at),
            (FlowKind::OneWay, _) => {}
        }
    }

    fn new_packet(&mut self, flow: FlowId, dir: Direction, created_at: SlotIndex, origin_at: SlotIndex) -> Packet {
        let id = self.records.len() as u64;
        let route_len = self.flows[flow.0 as usize].route(dir).len();
        self.records.push(PacketRecord {
            packet: id,
            flow,
            dir,
            created_at,
            delivered_at: None,
            dropped: false,
            hops: 0,
            route_len,
        });
        Packet { id, flow, dir, created_at, origin_at, hop_index: 0 }
    }

    fn enqueue(&mut self, frame: u64, s: SlotIndex, node: NodeId, p: Packet) {
        if let Err(p) = self.queues[node.index()].push(p) {
            self.records[p.id as usize].dropped = true;
            self.log(|| TraceEvent::Drop { frame, slot: s, node, flow: p.flow, pkt: p.id });
        }
    }

    fn run_frame_slots(&mut self, frame: u64) {
        let spf = self.slots_per_frame();
        for i in 0..spf {
            self.run_slot(frame, frame * spf + i);
        }
    }

    fn publish_flowdesc(&mut self, abs_frame: u64, nodes: &[NodeId]) {
        for &k in nodes {
            let c = self.fd[k.index()].0;
            self.peak_fd[k.index()] = self.peak_fd[k.index()].max(c);
            let state = NodeState::new(c, self.etau[k.index()], abs_frame);
            self.diss.update_own(k, state);
        }
    }

    fn admit(&mut self, abs_frame: u64, idx: usize) -> Result<(), EngineError> {
        let spec = self.flows[idx].spec.clone();
        let table = self.diss.table(spec.src);
        let route = routing::compute_route(&self.sc.graph, table, self.sc.metric, spec.src, spec.dst)?;
        apply_flow(&mut self.fd, &route, FlowDelta::Admit)?;
        let mut touched = route.to_vec();
        let reverse = match spec.kind {
            FlowKind::RttProbe => {
                let rev = route.reversed();
                apply_flow(&mut self.fd, &rev, FlowDelta::Admit)?;
                Some(rev)
            }
            FlowKind::OneWay => None,
        };
        touched.sort_unstable();
        self.publish_flowdesc(abs_frame, &touched);
        self.log(|| TraceEvent::Admit { frame: abs_frame, flow: spec.id, route: route.clone() });
        let st = &mut self.flows[idx];
        st.forward = Some(route);
        st.reverse = reverse;
        st.active = true;
        Ok(())
    }

    fn teardown(&mut self, abs_frame: u64, idx: usize) -> Result<(), EngineError> {
        let st = &mut self.flows[idx];
        st.active = false;
        let id = st.spec.id;
        let forward = st.forward.clone().expect("active flow has a route");
        let reverse = st.reverse.clone();
        apply_flow(&mut self.fd, &forward, FlowDelta::Teardown)?;
        if let Some(rev) = &reverse {
            apply_flow(&mut self.fd, rev, FlowDelta::Teardown)?;
        }
        let mut touched = forward.to_vec();
        touched.sort_unstable();
        self.publish_flowdesc(abs_frame, &touched);
        self.log(|| TraceEvent::Teardown { frame: abs_frame, flow: id });
        Ok(())
    }

    fn generate(&mut self, abs_frame: u64) {
        let slot = abs_frame * self.slots_per_frame();
        for idx in 0..self.flows.len() {
            if !self.flows[idx].active {
                continue;
            }
            let st = &mut self.flows[idx];
            st.credit += st.spec.rate;
            let n = st.credit.floor();
            st.credit -= n;
            let (flow, src) = (st.spec.id, st.spec.src);
            for _ in 0..n as u64 {
                let p = self.new_packet(flow, Direction::Forward, slot, slot);
                self.log(|| TraceEvent::Create { frame: abs_frame, slot, node: src, flow, pkt: p.id });
                self.enqueue(abs_frame, slot, src, p);
            }
        }
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    // Nearest-rank.
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Runs one scenario to completion.
pub fn run_scenario(sc: &Scenario) -> Result<SimOutput, EngineError> {
    let g = &sc.graph;
    sc.timing.validate()?;
    g.ensure_connected()?;
    sc.sched.validate(g)?;
    for (i, f) in sc.flows.iter().enumerate() {
        f.validate(g)?;
        if f.id.0 as usize != i {
            return Err(EngineError::InvalidFlow { id: f.id, reason: format!("ids must be dense; expected {i}") });
        }
    }

    let model = analytic::solve_default(g, &sc.sched)?;
    if !model.converged {
        return Err(EngineError::ModelNotConverged(model.iterations));
    }
    let initial: Vec<NodeState> = model.etau.iter().map(|&e| NodeState::new(0, e, 0)).collect();

    let mut sim = Sim {
        sc,
        election: Election::new(g, &sc.sched),
        diss: Dissemination::new(&initial, sc.ad_capacity),
        etau: model.etau.clone(),
        fd: vec![FlowDescriptor(0); g.node_count()],
        peak_fd: vec![0; g.node_count()],
        queues: (0..g.node_count()).map(|_| FairQueues::new(sc.timing.queue_capacity)).collect(),
        flows: sc
            .flows
            .iter()
            .map(|f| FlowState { spec: f.clone(), forward: None, reverse: None, active: false, credit: 0.0 })
            .collect(),
        records: Vec::new(),
        wins: Vec::new(),
        rtt_slots: Vec::new(),
        trace: Vec::new(),
    };

    // Warm-up: at least one frame so traffic-phase timestamps exceed the
    // initial ones.
    let mut warm = 0;
    while warm == 0 || (!sim.diss.is_converged() && warm < sc.warmup_cap.max(1)) {
        sim.run_frame_slots(warm);
        warm += 1;
    }
    if sc.metric == MetricKind::Esd && !sim.diss.is_converged() {
        return Err(EngineError::WarmupExhausted(warm));
    }
    let traffic_start_slot = warm * sim.slots_per_frame();

    for f in 0..sc.total_frames {
        let abs = warm + f;
        for idx in 0..sim.flows.len() {
            if sim.flows[idx].active && sim.flows[idx].spec.stop_frame == f {
                sim.teardown(abs, idx)?;
            }
        }
        for idx in 0..sim.flows.len() {
            let st = &sim.flows[idx];
            if st.forward.is_none() && st.spec.start_frame == f {
                sim.admit(abs, idx)?;
            }
        }
        sim.generate(abs);
        sim.run_frame_slots(abs);
    }

    let timing = &sc.timing;
    let slot_ms = timing.slot_ms();
    let mut data_delays: Vec<f64> = Vec::new();
    let mut data_bits = 0u64;
    let mut hops_sum = 0usize;
    let (mut delivered, mut dropped) = (0u64, 0u64);
    for r in &sim.records {
        if r.dropped {
            dropped += 1;
        }
        if let Some(at) = r.delivered_at {
            delivered += 1;
            let spec = &sim.flows[r.flow.0 as usize].spec;
            if spec.kind == FlowKind::OneWay {
                data_delays.push((at - r.created_at) as f64 * slot_ms);
                data_bits += u64::from(spec.packet_bytes) * 8;
                hops_sum += r.hops;
            }
        }
    }
    data_delays.sort_by(f64::total_cmp);
    let in_queue = sim.queues.iter().map(|q| q.len() as u64).sum();
    let window_s = sc.total_frames as f64 * timing.frame_ms / 1000.0;

    let report = MetricsReport {
        metric: sc.metric,
        frames: sc.total_frames,
        warmup_frames: warm,
        slot_ms,
        frame_ms: timing.frame_ms,
        mean_delay_ms: mean(data_delays.iter().copied()),
        p95_delay_ms: percentile(&data_delays, 0.95),
        mean_rtt_ms: mean(sim.rtt_slots.iter().map(|&s| s as f64 * slot_ms)),
        rtt_samples: sim.rtt_slots.len(),
        throughput_bps: if window_s > 0.0 { data_bits as f64 / window_s } else { 0.0 },
        data_delivered: data_delays.len() as u64,
        created: sim.records.len() as u64,
        delivered,
        dropped,
        in_queue,
        mean_hops: if data_delays.is_empty() { f64::NAN } else { hops_sum as f64 / data_delays.len() as f64 },
        peak_flowdesc: sim.peak_fd.clone(),
    };

    let routes = sim.flows.iter().filter_map(|f| f.forward.clone().map(|r| (f.spec.id, r))).collect();
    Ok(SimOutput {
        report,
        routes,
        packets: sim.records,
        wins: sim.wins,
        rtt_slots: sim.rtt_slots,
        traffic_start_slot,
        trace: sim.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(id: u64, flow: u32) -> Packet {
        Packet { id, flow: FlowId(flow), dir: Direction::Forward, created_at: 0, origin_at: 0, hop_index: 0 }
    }

    fn fill(q: &mut FairQueues, flow: u32, n: usize) {
        for i in 0..n {
            q.push(pkt(i as u64, flow)).unwrap();
        }
    }

    fn served_per_flow(batch: &[Packet]) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for p in batch {
            *m.entry(p.flow.0).or_default() += 1;
        }
        m
    }

    #[test]
    fn fair_split_between_two_queues() {
        let mut q = FairQueues::new(512);
        fill(&mut q, 0, 10);
        fill(&mut q, 1, 10);
        let out = q.serve(16);
        assert_eq!(served_per_flow(&out), BTreeMap::from([(0, 8), (1, 8)]));
    }

    #[test]
    fn short_queue_drains() {
        let mut q = FairQueues::new(512);
        fill(&mut q, 0, 3);
        assert_eq!(q.serve(16).len(), 3);
        assert!(q.is_empty());
    }

    #[test]
    fn uneven_queues_with_small_burst() {
        let mut q = FairQueues::new(512);
        fill(&mut q, 0, 5);
        fill(&mut q, 1, 1);
        let out = q.serve(4);
        assert_eq!(served_per_flow(&out), BTreeMap::from([(0, 3), (1, 1)]));
        let order: Vec<u32> = out.iter().map(|p| p.flow.0).collect();
        assert_eq!(order, vec![0, 1, 0, 0]);
    }

    #[test]
    fn pointer_resumes_across_wins() {
        let mut q = FairQueues::new(512);
        fill(&mut q, 0, 4);
        fill(&mut q, 1, 4);
        fill(&mut q, 2, 4);
        let a: Vec<u32> = q.serve(2).iter().map(|p| p.flow.0).collect();
        let b: Vec<u32> = q.serve(2).iter().map(|p| p.flow.0).collect();
        assert_eq!(a, vec![0, 1]);
        assert_eq!(b, vec![2, 0]);
    }

    #[test]
    fn full_queue_rejects() {
        let mut q = FairQueues::new(2);
        fill(&mut q, 0, 2);
        assert!(q.push(pkt(9, 0)).is_err());
        assert!(q.push(pkt(9, 1)).is_ok());
        assert_eq!(q.queue_len((FlowId(0), Direction::Forward)), 2);
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
        assert!(percentile(&[], 0.5).is_nan());
    }

    #[test]
    fn timing_validation() {
        assert!(TimingConfig::default().validate().is_ok());
        assert_eq!(TimingConfig::default().slot_ms(), 0.625);
        let bad = TimingConfig { burst: 0, ..TimingConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn flow_validation() {
        let g = MeshGraph::grid(2, 2);
        let ok = FlowSpec {
            id: FlowId(0),
            src: NodeId(0),
            dst: NodeId(3),
            rate: 1.0,
            packet_bytes: 100,
            start_frame: 0,
            stop_frame: 10,
            kind: FlowKind::OneWay,
        };
        assert!(ok.validate(&g).is_ok());
        assert!(FlowSpec { dst: NodeId(0), ..ok.clone() }.validate(&g).is_err());
        assert!(FlowSpec { rate: 0.0, ..ok.clone() }.validate(&g).is_err());
        assert!(FlowSpec { stop_frame: 0, ..ok.clone() }.validate(&g).is_err());
        assert!(FlowSpec { dst: NodeId(4), ..ok }.validate(&g).is_err());
    }
}
