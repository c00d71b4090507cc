//! Scenario configuration, paired ESD / hop-count runs, sweeps and CSV output.

mod cli;
mod config;

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analytic::{SchedulerConfig, DEFAULT_BASE, MAX_EXPONENT};
use crate::engine::{self, EngineError, FlowId, FlowKind, FlowSpec, MetricsReport, Scenario, SimOutput, TimingConfig};
use crate::parallel;
use crate::routing::MetricKind;
use crate::topology::{MeshGraph, NodeId};

pub use cli::{main_with_args, Cli, Command};
pub use config::parse_key_values;

pub const CSV_HEADER: &str =
    "scenario,metric,rows,cols,flows,holdoff_exp,frames,mean_delay_ms,p95_delay_ms,mean_rtt_ms,throughput_bps,delivered,dropped";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid `{field}`: {msg}")]
    Validation { field: &'static str, msg: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl HarnessError {
    pub fn validation(field: &'static str, msg: impl Into<String>) -> Self {
        HarnessError::Validation { field, msg: msg.into() }
    }

    /// Process exit status: 1 for validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation { .. } => 1,
            HarnessError::Engine(_) | HarnessError::Io { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySpec {
    Grid { rows: usize, cols: usize },
    /// Loaded from a topology file.
    Custom { label: String, graph: MeshGraph },
}

impl TopologySpec {
    pub fn build(&self) -> MeshGraph {
        match self {
            TopologySpec::Grid { rows, cols } => MeshGraph::grid(*rows, *cols),
            TopologySpec::Custom { graph, .. } => graph.clone(),
        }
    }

    fn dims(&self) -> (String, String) {
        match self {
            TopologySpec::Grid { rows, cols } => (rows.to_string(), cols.to_string()),
            TopologySpec::Custom { .. } => (String::new(), String::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Exponents {
    Uniform(u8),
    /// Default plus `(node, exponent)` overrides.
    PerNode { default: u8, overrides: Vec<(usize, u8)> },
}

impl Exponents {
    fn label(&self) -> String {
        match self {
            Exponents::Uniform(x) => x.to_string(),
            Exponents::PerNode { .. } => "per-node".to_string(),
        }
    }

    fn scheduler(&self, node_count: usize) -> Result<SchedulerConfig, HarnessError> {
        let (default, overrides) = match self {
            Exponents::Uniform(x) => (*x, &[][..]),
            Exponents::PerNode { default, overrides } => (*default, &overrides[..]),
        };
        let mut exponents = vec![default; node_count];
        for &(node, x) in overrides {
            let slot = exponents.get_mut(node).ok_or_else(|| {
                HarnessError::validation("holdoff-exp-file", format!("node {node} outside {node_count}-node topology"))
            })?;
            *slot = x;
        }
        if let Some(x) = exponents.iter().find(|&&x| x > MAX_EXPONENT) {
            return Err(HarnessError::validation("holdoff-exp", format!("{x} outside [0, {MAX_EXPONENT}]")));
        }
        Ok(SchedulerConfig { base: DEFAULT_BASE, exponents })
    }
}

/// Full description of an experiment point (before the per-seed flow draw).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub topology: TopologySpec,
    pub flows: usize,
    /// Packets per frame per data flow.
    pub flow_rate: f64,
    pub packet_bytes: u32,
    /// RTT probe flows, admitted after the data flows.
    pub probes: usize,
    /// Request rate of each probe; `None` uses `flow_rate`.
    pub probe_rate: Option<f64>,
    /// Frames between successive flow admissions.
    pub stagger: u64,
    /// Traffic-free frames at the end of the run for queues to drain.
    pub drain: u64,
    pub exponents: Exponents,
    pub metrics: Vec<MetricKind>,
    pub timing: TimingConfig,
    /// Traffic-phase frames.
    pub frames: u64,
    pub warmup_cap: u64,
    pub ad_capacity: usize,
    pub scenario_id: String,
    /// Independent flow draws averaged into each row.
    pub seeds: u32,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            topology: TopologySpec::Grid { rows: 5, cols: 5 },
            flows: 4,
            flow_rate: 4.0,
            packet_bytes: 256,
            probes: 1,
            probe_rate: None,
            stagger: 20,
            drain: 150,
            exponents: Exponents::Uniform(0),
            metrics: MetricKind::ALL.to_vec(),
            timing: TimingConfig::default(),
            frames: 600,
            warmup_cap: 500,
            ad_capacity: crate::dissemination::DEFAULT_CAPACITY,
            scenario_id: "s0".to_string(),
            seeds: 1,
            out: None,
            trace: None,
        }
    }
}

/// 64-bit FNV-1a, used to key the flow generator by scenario id.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Deterministic distinct `(src, dst)` pair for flow `index` of draw `seed`.
///
/// Keyed only by `(scenario, seed, domain, index)`, so flow `i` is the same
/// pair at every sweep point and for every metric.
pub fn flow_endpoints(scenario: &str, seed: u32, domain: &str, index: usize, node_count: usize) -> (NodeId, NodeId) {
    assert!(node_count >= 2, "flows need at least two nodes");
    let key = fnv1a(format!("{scenario}/{seed}/{domain}/{index}").as_bytes());
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    let src = rng.random_range(0..node_count);
    let mut dst = rng.random_range(0..node_count - 1);
    if dst >= src {
        dst += 1;
    }
    (NodeId(src), NodeId(dst))
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<MeshGraph, HarnessError> {
        let v = HarnessError::validation;
        if let TopologySpec::Grid { rows, cols } = self.topology {
            if rows == 0 {
                return Err(v("rows", "must be at least 1"));
            }
            if cols == 0 {
                return Err(v("cols", "must be at least 1"));
            }
        }
        let g = self.topology.build();
        if !g.is_connected() {
            return Err(v("topology", "graph is not connected"));
        }
        self.exponents.scheduler(g.node_count())?;
        if (self.flows > 0 || self.probes > 0) && g.node_count() < 2 {
            return Err(v("flows", "need at least two nodes for traffic"));
        }
        if !(self.flow_rate > 0.0 && self.flow_rate.is_finite()) {
            return Err(v("flow-rate", "must be positive"));
        }
        if !(self.probe_rate() > 0.0 && self.probe_rate().is_finite()) {
            return Err(v("probe-rate", "must be positive"));
        }
        if self.packet_bytes == 0 {
            return Err(v("packet-bytes", "must be positive"));
        }
        if self.metrics.is_empty() {
            return Err(v("metric", "no metric selected"));
        }
        if !(self.timing.frame_ms > 0.0 && self.timing.frame_ms.is_finite()) {
            return Err(v("frame-ms", "must be positive"));
        }
        if self.timing.control_slots_per_frame == 0 {
            return Err(v("control-slots", "must be positive"));
        }
        if self.timing.burst == 0 {
            return Err(v("burst", "must be positive"));
        }
        if self.timing.queue_capacity == 0 {
            return Err(v("queue-cap", "must be positive"));
        }
        if self.ad_capacity == 0 {
            return Err(v("ad-capacity", "must be positive"));
        }
        if self.seeds == 0 {
            return Err(v("seeds", "must be at least 1"));
        }
        let last_start = (self.flows + self.probes).saturating_sub(1) as u64 * self.stagger;
        if self.flows + self.probes > 0 && last_start >= self.frames.saturating_sub(self.drain) {
            return Err(HarnessError::validation(
                "frames",
                format!("{} frames leave no traffic time after {} staggered starts and {} drain frames", self.frames, last_start, self.drain),
            ));
        }
        Ok(g)
    }

    pub fn probe_rate(&self) -> f64 {
        self.probe_rate.unwrap_or(self.flow_rate)
    }

    /// Flow list for draw `seed`.
    pub fn flow_specs(&self, node_count: usize, seed: u32) -> Vec<FlowSpec> {
        let stop = self.frames - self.drain;
        let data = (0..self.flows).map(|i| {
            let (src, dst) = flow_endpoints(&self.scenario_id, seed, "data", i, node_count);
            (src, dst, self.flow_rate, FlowKind::OneWay)
        });
        let probes = (0..self.probes).map(|j| {
            let (src, dst) = flow_endpoints(&self.scenario_id, seed, "probe", j, node_count);
            (src, dst, self.probe_rate(), FlowKind::RttProbe)
        });
        data.chain(probes)
            .enumerate()
            .map(|(i, (src, dst, rate, kind))| FlowSpec {
                id: FlowId(i as u32),
                src,
                dst,
                rate,
                packet_bytes: self.packet_bytes,
                start_frame: i as u64 * self.stagger,
                stop_frame: stop,
                kind,
            })
            .collect()
    }

    pub fn scenario(&self, metric: MetricKind, seed: u32) -> Result<Scenario, HarnessError> {
        let graph = self.validate()?;
        let sched = self.exponents.scheduler(graph.node_count())?;
        let flows = self.flow_specs(graph.node_count(), seed);
        Ok(Scenario {
            graph,
            sched,
            timing: self.timing.clone(),
            flows,
            metric,
            total_frames: self.frames,
            warmup_cap: self.warmup_cap,
            ad_capacity: self.ad_capacity,
            record_trace: self.trace.is_some(),
        })
    }
}

/// One CSV row: a sweep point under one metric, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub scenario: String,
    pub metric: MetricKind,
    pub rows: String,
    pub cols: String,
    pub flows: usize,
    pub holdoff_exp: String,
    pub frames: u64,
    pub mean_delay_ms: f64,
    pub p95_delay_ms: f64,
    pub mean_rtt_ms: f64,
    pub throughput_bps: f64,
    /// Totals over seeds.
    pub delivered: u64,
    pub dropped: u64,
    pub reports: Vec<MetricsReport>,
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.4}")
    }
}

impl Row {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.metric,
            self.rows,
            self.cols,
            self.flows,
            self.holdoff_exp,
            self.frames,
            fmt_f(self.mean_delay_ms),
            fmt_f(self.p95_delay_ms),
            fmt_f(self.mean_rtt_ms),
            fmt_f(self.throughput_bps),
            self.delivered,
            self.dropped
        )
    }
}

/// Mean over the non-NaN values, NaN if there are none.
fn nan_mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.filter(|x| !x.is_nan()).fold((0.0, 0u32), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / f64::from(n)
    }
}

fn aggregate(cfg: &ScenarioConfig, metric: MetricKind, reports: Vec<MetricsReport>) -> Row {
    let (rows, cols) = cfg.topology.dims();
    Row {
        scenario: cfg.scenario_id.clone(),
        metric,
        rows,
        cols,
        flows: cfg.flows,
        holdoff_exp: cfg.exponents.label(),
        frames: cfg.frames,
        mean_delay_ms: nan_mean(reports.iter().map(|r| r.mean_delay_ms)),
        p95_delay_ms: nan_mean(reports.iter().map(|r| r.p95_delay_ms)),
        mean_rtt_ms: nan_mean(reports.iter().map(|r| r.mean_rtt_ms)),
        throughput_bps: nan_mean(reports.iter().map(|r| r.throughput_bps)),
        delivered: reports.iter().map(|r| r.delivered).sum(),
        dropped: reports.iter().map(|r| r.dropped).sum(),
        reports,
    }
}

/// A single engine run: point index, metric, seed.
#[derive(Debug, Clone)]
struct Job {
    point: usize,
    metric: MetricKind,
    seed: u32,
}

/// Results of a batch of points.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    /// Full engine outputs, in row order then seed order.
    pub outputs: Vec<SimOutput>,
}

impl RunOutput {
    pub fn csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.to_csv());
        }
        out
    }
}

/// Runs every `(point, metric, seed)` combination, in parallel when enabled,
/// and returns rows in point-major, metric-minor order.
pub fn run_points(points: &[ScenarioConfig], parallel_jobs: bool) -> Result<RunOutput, HarnessError> {
    let mut jobs = Vec::new();
    let mut scenarios = Vec::new();
    for (i, p) in points.iter().enumerate() {
        p.validate()?;
        for &metric in &p.metrics {
            for seed in 0..p.seeds {
                scenarios.push(p.scenario(metric, seed)?);
                jobs.push(Job { point: i, metric, seed });
            }
        }
    }
    let run = |sc: &Scenario| engine::run_scenario(sc);
    let results = if parallel_jobs {
        parallel::map_ordered(&scenarios, run)
    } else {
        parallel::map_sequential(&scenarios, run)
    };

    let mut rows: Vec<Row> = Vec::new();
    let mut outputs = Vec::with_capacity(results.len());
    let mut pending: Vec<MetricsReport> = Vec::new();
    for (job, res) in jobs.iter().zip(results) {
        let out = res?;
        pending.push(out.report.clone());
        outputs.push(out);
        if job.seed + 1 == points[job.point].seeds {
            rows.push(aggregate(&points[job.point], job.metric, std::mem::take(&mut pending)));
        }
    }
    Ok(RunOutput { rows, outputs })
}

/// Single point, one row per metric.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, HarnessError> {
    run_points(std::slice::from_ref(config), true)
}

pub fn flow_sweep_points(config: &ScenarioConfig, min: usize, max: usize) -> Result<Vec<ScenarioConfig>, HarnessError> {
    if min > max {
        return Err(HarnessError::validation("min-flows", format!("{min} exceeds max-flows {max}")));
    }
    Ok((min..=max).map(|n| ScenarioConfig { flows: n, ..config.clone() }).collect())
}

pub fn grid_sweep_points(config: &ScenarioConfig, sizes: &[(usize, usize)]) -> Result<Vec<ScenarioConfig>, HarnessError> {
    if sizes.is_empty() {
        return Err(HarnessError::validation("sizes", "empty grid size list"));
    }
    Ok(sizes
        .iter()
        .map(|&(rows, cols)| ScenarioConfig { topology: TopologySpec::Grid { rows, cols }, ..config.clone() })
        .collect())
}

pub fn sweep_flows(config: &ScenarioConfig, min: usize, max: usize) -> Result<RunOutput, HarnessError> {
    run_points(&flow_sweep_points(config, min, max)?, true)
}

pub fn sweep_grid(config: &ScenarioConfig, sizes: &[(usize, usize)]) -> Result<RunOutput, HarnessError> {
    run_points(&grid_sweep_points(config, sizes)?, true)
}

/// Renders a trace in the `event,frame,slot,node,flow,pkt,detail` format.
pub fn trace_text(out: &SimOutput) -> String {
    let mut s = String::with_capacity(48 * (out.trace.len() + 1));
    s.push_str(engine::TraceEvent::HEADER);
    s.push('\n');
    for ev in &out.trace {
        let _ = writeln!(s, "{ev}");
    }
    s
}
