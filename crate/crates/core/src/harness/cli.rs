//! `esdsim` command line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{get, parse_key_values, parse_sizes};
use super::{
    flow_sweep_points, grid_sweep_points, run_points, trace_text, HarnessError, RunOutput, ScenarioConfig, TopologySpec,
};
use crate::analytic;
use crate::election::{interval_of, run_election};

#[derive(Debug, Parser)]
#[command(name = "esdsim", about = "802.16 mesh coordinated-scheduling simulator with ESD routing", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one scenario; one CSV row per metric.
    Run(ScenarioArgs),
    /// Sweep the number of flows.
    SweepFlows(ScenarioArgs),
    /// Sweep grid sizes.
    SweepGrid(ScenarioArgs),
    /// Print holdoff, E[S] and E[tau] per node.
    Analytic(ScenarioArgs),
    /// Compare simulated election intervals with the analytic model.
    ElectionCheck(ScenarioArgs),
}

/// Every value is taken as a string so that parse failures are reported
/// against the field name with the validation exit status.
#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// key=value file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub rows: Option<String>,
    #[arg(long)]
    pub cols: Option<String>,
    /// Topology file (`nodes N` then `link A B` lines).
    #[arg(long)]
    pub topology: Option<String>,
    #[arg(long)]
    pub flows: Option<String>,
    /// Packets per frame per data flow.
    #[arg(long = "flow-rate")]
    pub flow_rate: Option<String>,
    #[arg(long = "packet-bytes")]
    pub packet_bytes: Option<String>,
    /// RTT probe flows.
    #[arg(long)]
    pub probes: Option<String>,
    /// Requests per frame per probe; defaults to the data flow rate.
    #[arg(long = "probe-rate")]
    pub probe_rate: Option<String>,
    /// Frames between flow admissions.
    #[arg(long)]
    pub stagger: Option<String>,
    /// Traffic-free frames at the end of the run.
    #[arg(long)]
    pub drain: Option<String>,
    #[arg(long = "holdoff-exp")]
    pub holdoff_exp: Option<String>,
    /// Per-node exponents, `node exponent` per line.
    #[arg(long = "holdoff-exp-file")]
    pub holdoff_exp_file: Option<String>,
    /// esd | hopcount | both
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub frames: Option<String>,
    #[arg(long = "frame-ms")]
    pub frame_ms: Option<String>,
    #[arg(long = "control-slots")]
    pub control_slots: Option<String>,
    #[arg(long)]
    pub burst: Option<String>,
    #[arg(long = "queue-cap")]
    pub queue_cap: Option<String>,
    #[arg(long = "warmup-frames")]
    pub warmup_frames: Option<String>,
    #[arg(long = "ad-capacity")]
    pub ad_capacity: Option<String>,
    #[arg(long = "scenario-id")]
    pub scenario_id: Option<String>,
    /// Flow draws averaged per row.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub trace: Option<String>,
    #[arg(long = "min-flows")]
    pub min_flows: Option<String>,
    #[arg(long = "max-flows")]
    pub max_flows: Option<String>,
    /// Grid sizes, e.g. `3x3,4x4,5x5`.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Slots simulated by `election-check`.
    #[arg(long)]
    pub slots: Option<String>,
}

impl ScenarioArgs {
    fn flag_map(&self) -> BTreeMap<String, String> {
        let pairs: [(&str, &Option<String>); 28] = [
            ("rows", &self.rows),
            ("cols", &self.cols),
            ("topology", &self.topology),
            ("flows", &self.flows),
            ("flow-rate", &self.flow_rate),
            ("packet-bytes", &self.packet_bytes),
            ("probes", &self.probes),
            ("probe-rate", &self.probe_rate),
            ("stagger", &self.stagger),
            ("drain", &self.drain),
            ("holdoff-exp", &self.holdoff_exp),
            ("holdoff-exp-file", &self.holdoff_exp_file),
            ("metric", &self.metric),
            ("frames", &self.frames),
            ("frame-ms", &self.frame_ms),
            ("control-slots", &self.control_slots),
            ("burst", &self.burst),
            ("queue-cap", &self.queue_cap),
            ("warmup-frames", &self.warmup_frames),
            ("ad-capacity", &self.ad_capacity),
            ("scenario-id", &self.scenario_id),
            ("seeds", &self.seeds),
            ("out", &self.out),
            ("trace", &self.trace),
            ("min-flows", &self.min_flows),
            ("max-flows", &self.max_flows),
            ("sizes", &self.sizes),
            ("slots", &self.slots),
        ];
        pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect()
    }

    /// Config file entries overlaid by explicit flags.
    fn merged(&self) -> Result<BTreeMap<String, String>, HarnessError> {
        let mut map = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
                parse_key_values(&text)?
            }
            None => BTreeMap::new(),
        };
        let flags = self.flag_map();
        // A topology file given as a flag replaces grid dimensions from the file and vice versa.
        if flags.contains_key("rows") || flags.contains_key("cols") {
            map.remove("topology");
        }
        map.extend(flags);
        Ok(map)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

/// `trace.csv` -> `trace.esd.csv` when several runs share one trace path.
fn suffixed(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    path.with_file_name(name)
}

fn emit(cfg: &ScenarioConfig, out: &RunOutput, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let csv = out.csv();
    match &cfg.out {
        Some(path) => write_file(path, &csv)?,
        None => stdout
            .write_all(csv.as_bytes())
            .map_err(|source| HarnessError::Io { path: PathBuf::from("<stdout>"), source })?,
    }
    if let Some(path) = &cfg.trace {
        let traces: Vec<_> = out.outputs.iter().collect();
        if traces.len() == 1 {
            write_file(path, &trace_text(traces[0]))?;
        } else {
            for (i, o) in traces.iter().enumerate() {
                let tag = format!("{}.{}", i, o.report.metric);
                write_file(&suffixed(path, &tag), &trace_text(o))?;
            }
        }
    }
    Ok(())
}

fn analytic_table(cfg: &ScenarioConfig) -> Result<String, HarnessError> {
    let g = cfg.validate()?;
    let sched = cfg.exponents.scheduler(g.node_count())?;
    let model = analytic::solve_default(&g, &sched).map_err(crate::engine::EngineError::from)?;
    let mut s = String::from("node,x,holdoff,ES,Etau\n");
    for k in g.nodes() {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6}",
            k,
            sched.exponent(k),
            sched.holdoff(k),
            model.es[k.index()],
            model.etau[k.index()]
        );
    }
    Ok(s)
}

fn election_table(cfg: &ScenarioConfig, slots: u64) -> Result<String, HarnessError> {
    let g = cfg.validate()?;
    let sched = cfg.exponents.scheduler(g.node_count())?;
    let model = analytic::solve_default(&g, &sched).map_err(crate::engine::EngineError::from)?;
    let (_, state) = run_election(&g, &sched, slots);
    let mut s = String::from("node,wins,mean_interval,analytic_Etau\n");
    for k in g.nodes() {
        let wins = &state.win_history[k.index()];
        let mean = interval_of(wins, k).map_or_else(|_| "nan".to_string(), |m| format!("{m:.6}"));
        let _ = writeln!(s, "{},{},{},{:.6}", k, wins.len(), mean, model.etau[k.index()]);
    }
    Ok(s)
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<(), HarnessError> {
    let (args, kind) = match &cli.command {
        Command::Run(a) => (a, "run"),
        Command::SweepFlows(a) => (a, "sweep-flows"),
        Command::SweepGrid(a) => (a, "sweep-grid"),
        Command::Analytic(a) => (a, "analytic"),
        Command::ElectionCheck(a) => (a, "election-check"),
    };
    let mut map = args.merged()?;
    if matches!(kind, "analytic" | "election-check") {
        // No traffic is simulated; don't let traffic defaults fail validation on tiny graphs.
        for key in ["flows", "probes"] {
            map.entry(key.to_string()).or_insert_with(|| "0".to_string());
        }
    }
    let cfg = ScenarioConfig::from_map(&map)?;
    let io = |source| HarnessError::Io { path: PathBuf::from("<stdout>"), source };

    match kind {
        "run" => {
            let out = run_points(std::slice::from_ref(&cfg), true)?;
            emit(&cfg, &out, stdout)
        }
        "sweep-flows" => {
            let min = get(&map, "min-flows")?.unwrap_or(1);
            let max = get(&map, "max-flows")?.unwrap_or(10);
            let points = flow_sweep_points(&cfg, min, max)?;
            for p in &points {
                p.validate()?;
            }
            emit(&cfg, &run_points(&points, true)?, stdout)
        }
        "sweep-grid" => {
            let sizes = match map.get("sizes") {
                Some(raw) => parse_sizes(raw)?,
                None => vec![(3, 3), (4, 4), (5, 5), (6, 6)],
            };
            if matches!(cfg.topology, TopologySpec::Custom { .. }) {
                return Err(HarnessError::validation("topology", "sweep-grid builds its own grids"));
            }
            let points = grid_sweep_points(&cfg, &sizes)?;
            for p in &points {
                p.validate()?;
            }
            emit(&cfg, &run_points(&points, true)?, stdout)
        }
        "analytic" => stdout.write_all(analytic_table(&cfg)?.as_bytes()).map_err(io),
        "election-check" => {
            let slots = get(&map, "slots")?.unwrap_or(100_000u64);
            if slots == 0 {
                return Err(HarnessError::validation("slots", "must be positive"));
            }
            stdout.write_all(election_table(&cfg, slots)?.as_bytes()).map_err(io)
        }
        _ => unreachable!(),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn main_with_args<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "esdsim: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = main_with_args(std::iter::once("esdsim").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn analytic_subcommand() {
        let (code, out, _) = run(&["analytic", "--rows", "1", "--cols", "2", "--flows", "0", "--probes", "0"]);
        assert_eq!(code, 0);
        assert_eq!(out, "node,x,holdoff,ES,Etau\n0,0,16,2.000000,18.000000\n1,0,16,2.000000,18.000000\n");
    }

    #[test]
    fn election_check_subcommand() {
        let (code, out, _) = run(&["election-check", "--rows", "1", "--cols", "1", "--flows", "0", "--probes", "0", "--slots", "35"]);
        assert_eq!(code, 0);
        assert_eq!(out, "node,wins,mean_interval,analytic_Etau\n0,3,17.000000,17.000000\n");
    }

    #[test]
    fn bad_exponent_exits_1_naming_field() {
        let (code, _, err) = run(&["run", "--rows", "3", "--cols", "3", "--holdoff-exp", "9"]);
        assert_eq!(code, 1);
        assert!(err.contains("holdoff-exp"), "{err}");
        let (code, _, err) = run(&["run", "--flows", "lots"]);
        assert_eq!(code, 1);
        assert!(err.contains("flows"), "{err}");
        let (code, _, _) = run(&["frobnicate"]);
        assert_eq!(code, 1);
    }

    #[test]
    fn missing_topology_file_is_runtime_error() {
        let (code, _, _) = run(&["run", "--topology", "/nonexistent/topo.txt"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn suffixing() {
        assert_eq!(suffixed(Path::new("/t/trace.csv"), "0.esd"), PathBuf::from("/t/trace.0.esd.csv"));
        assert_eq!(suffixed(Path::new("trace"), "1.hopcount"), PathBuf::from("trace.1.hopcount"));
    }
}
