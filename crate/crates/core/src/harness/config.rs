//! Flat `key=value` configuration and its mapping onto [`ScenarioConfig`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Exponents, HarnessError, ScenarioConfig, TopologySpec};
use crate::routing::MetricKind;
use crate::topology::MeshGraph;

/// Keys accepted in config files and as `--flag` names.
pub(super) const SCENARIO_KEYS: &[&str] = &[
    "rows",
    "cols",
    "topology",
    "flows",
    "flow-rate",
    "packet-bytes",
    "probes",
    "probe-rate",
    "stagger",
    "drain",
    "holdoff-exp",
    "holdoff-exp-file",
    "metric",
    "frames",
    "frame-ms",
    "control-slots",
    "burst",
    "queue-cap",
    "warmup-frames",
    "ad-capacity",
    "scenario-id",
    "seeds",
    "out",
    "trace",
    "min-flows",
    "max-flows",
    "sizes",
    "slots",
];

/// Parses `key = value` lines; `#` starts a comment. Keys are normalized to
/// the flag spelling (`flow_rate` and `flow-rate` are the same key).
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::validation("config", format!("line {}: expected key=value", i + 1)))?;
        let key = k.trim().replace('_', "-").to_ascii_lowercase();
        if !SCENARIO_KEYS.contains(&key.as_str()) {
            return Err(HarnessError::validation("config", format!("line {}: unknown key `{key}`", i + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

pub(super) fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &'static str) -> Result<Option<T>, HarnessError> {
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<T>()
            .map(Some)
            .map_err(|_| HarnessError::validation(key, format!("cannot parse `{raw}`"))),
    }
}

fn parse_metrics(raw: &str) -> Result<Vec<MetricKind>, HarnessError> {
    match raw.to_ascii_lowercase().as_str() {
        "both" | "all" => Ok(MetricKind::ALL.to_vec()),
        other => other
            .parse::<MetricKind>()
            .map(|m| vec![m])
            .map_err(|e| HarnessError::validation("metric", e)),
    }
}

/// `node exponent` per line.
pub(super) fn parse_exponent_file(text: &str) -> Result<Vec<(usize, u8)>, HarnessError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || HarnessError::validation("holdoff-exp-file", format!("line {}: expected `node exponent`", i + 1));
        let mut it = line.split_whitespace();
        let node = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        let x = it.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        out.push((node, x));
    }
    Ok(out)
}

/// `3x3,4x4` or `3,4` (square).
pub(super) fn parse_sizes(raw: &str) -> Result<Vec<(usize, usize)>, HarnessError> {
    raw.split(',')
        .map(|t| {
            let t = t.trim();
            let bad = || HarnessError::validation("sizes", format!("cannot parse `{t}`"));
            match t.split_once(['x', 'X']) {
                Some((r, c)) => Ok((r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?)),
                None => {
                    let n = t.parse().map_err(|_| bad())?;
                    Ok((n, n))
                }
            }
        })
        .collect()
}

impl ScenarioConfig {
    /// Builds a config from merged key/value settings over the defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, HarnessError> {
        let mut c = ScenarioConfig::default();

        if let Some(path) = map.get("topology") {
            let text = read(Path::new(path))?;
            let graph: MeshGraph = text.parse().map_err(|e| HarnessError::validation("topology", format!("{e}")))?;
            c.topology = TopologySpec::Custom { label: path.clone(), graph };
        } else {
            let (mut rows, mut cols) = match c.topology {
                TopologySpec::Grid { rows, cols } => (rows, cols),
                TopologySpec::Custom { .. } => unreachable!("default is a grid"),
            };
            rows = get(map, "rows")?.unwrap_or(rows);
            cols = get(map, "cols")?.unwrap_or(cols);
            c.topology = TopologySpec::Grid { rows, cols };
        }

        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = get(map, $key)? {
                    $field = v;
                }
            };
        }
        set!(c.flows, "flows");
        set!(c.flow_rate, "flow-rate");
        set!(c.packet_bytes, "packet-bytes");
        set!(c.probes, "probes");
        c.probe_rate = get(map, "probe-rate")?;
        set!(c.stagger, "stagger");
        set!(c.drain, "drain");
        set!(c.frames, "frames");
        set!(c.timing.frame_ms, "frame-ms");
        set!(c.timing.control_slots_per_frame, "control-slots");
        set!(c.timing.burst, "burst");
        set!(c.timing.queue_capacity, "queue-cap");
        set!(c.warmup_cap, "warmup-frames");
        set!(c.ad_capacity, "ad-capacity");
        set!(c.scenario_id, "scenario-id");
        set!(c.seeds, "seeds");

        let default_x: u8 = get(map, "holdoff-exp")?.unwrap_or(0);
        c.exponents = match map.get("holdoff-exp-file") {
            Some(path) => Exponents::PerNode { default: default_x, overrides: parse_exponent_file(&read(Path::new(path))?)? },
            None => Exponents::Uniform(default_x),
        };
        if let Some(raw) = map.get("metric") {
            c.metrics = parse_metrics(raw)?;
        }
        if c.scenario_id.is_empty() || c.scenario_id.contains([',', '\n']) {
            return Err(HarnessError::validation("scenario-id", "must be non-empty without commas"));
        }
        c.out = map.get("out").map(PathBuf::from);
        c.trace = map.get("trace").map(PathBuf::from);
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_parsing() {
        let m = parse_key_values("# comment\nrows = 4\nflow_rate=2.5  # trailing\n\nmetric=esd\n").unwrap();
        assert_eq!(m.get("rows").map(String::as_str), Some("4"));
        assert_eq!(m.get("flow-rate").map(String::as_str), Some("2.5"));
        assert!(matches!(parse_key_values("bogus=1"), Err(HarnessError::Validation { field: "config", .. })));
        assert!(matches!(parse_key_values("rows"), Err(HarnessError::Validation { field: "config", .. })));
    }

    #[test]
    fn map_to_config() {
        let m = parse_key_values("rows=3\ncols=4\nflows=2\nmetric=hopcount\nholdoff-exp=1\nframes=300").unwrap();
        let c = ScenarioConfig::from_map(&m).unwrap();
        assert_eq!(c.topology, TopologySpec::Grid { rows: 3, cols: 4 });
        assert_eq!(c.metrics, vec![MetricKind::HopCount]);
        assert_eq!(c.exponents, Exponents::Uniform(1));
        assert_eq!(c.frames, 300);
    }

    #[test]
    fn bad_values_name_the_field() {
        let m = parse_key_values("holdoff-exp=9").unwrap();
        assert!(matches!(ScenarioConfig::from_map(&m), Err(HarnessError::Validation { field: "holdoff-exp", .. })));
        let m = parse_key_values("flows=many").unwrap();
        assert!(matches!(ScenarioConfig::from_map(&m), Err(HarnessError::Validation { field: "flows", .. })));
        let m = parse_key_values("metric=etx").unwrap();
        assert!(matches!(ScenarioConfig::from_map(&m), Err(HarnessError::Validation { field: "metric", .. })));
    }

    #[test]
    fn sizes_and_exponent_files() {
        assert_eq!(parse_sizes("3x3, 4X5,6").unwrap(), vec![(3, 3), (4, 5), (6, 6)]);
        assert!(parse_sizes("3y3").is_err());
        assert_eq!(parse_exponent_file("0 1\n# c\n4 2\n").unwrap(), vec![(0, 1), (4, 2)]);
        assert!(parse_exponent_file("0\n").is_err());
    }
}
