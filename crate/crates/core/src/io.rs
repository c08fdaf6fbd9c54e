//! File formats for networks, scenarios, trajectory logs and GPS traces,
//! plus GPS-to-network ingestion.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::env::{MdpCompilation, NetworkError, Node, NodeId, StreetNetwork, Edge};
use crate::sim::{ProfileGroup, ProfileTemplate, Scenario, DEFAULT_DISCOUNT, DEFAULT_SLIP};
use crate::trajectory::{LogEntry, Source, Trajectory, TrajectoryLog};

pub const NETWORK_VERSION: u64 = 1;
pub const SCENARIO_VERSION: u64 = 1;
pub const LOG_MAGIC: &str = "wayward-log";
pub const LOG_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum IoError {
    /// `line` and `column` are 1-based; `offset` is the byte offset into the input.
    #[error("parse error at line {line}, column {column} (byte {offset}): {detail}")]
    Parse { line: usize, column: usize, offset: usize, detail: String },
    #[error("schema version {found} not supported (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    InvalidNetwork(#[from] NetworkError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("GPS trace is empty")]
    EmptyTrace,
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    fn at_line(line: usize, detail: impl Into<String>) -> Self {
        IoError::Parse { line, column: 1, offset: 0, detail: detail.into() }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn json_error(text: &str, e: serde_json::Error) -> IoError {
    let (line, column) = (e.line(), e.column());
    IoError::Parse { line, column, offset: byte_offset(text, line, column), detail: e.to_string() }
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

fn check_version(text: &str, expected: u64) -> Result<Value, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| json_error(text, e))?;
    match value.get("version").map(Value::as_u64) {
        Some(Some(v)) if v == expected => Ok(value),
        Some(Some(found)) => Err(IoError::SchemaVersionMismatch { found, expected }),
        Some(None) => Err(IoError::at_line(1, "\"version\" must be a non-negative integer")),
        None => Err(IoError::at_line(1, "missing \"version\"")),
    }
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    version: u64,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

pub fn network_to_json(net: &StreetNetwork) -> String {
    let file = NetworkFile { version: NETWORK_VERSION, nodes: net.nodes().to_vec(), edges: net.edges().to_vec() };
    serde_json::to_string_pretty(&file).expect("network serializes")
}

/// The network payload sent to clients and stored on disk.
pub fn network_to_value(net: &StreetNetwork) -> Value {
    serde_json::to_value(NetworkFile {
        version: NETWORK_VERSION,
        nodes: net.nodes().to_vec(),
        edges: net.edges().to_vec(),
    })
    .expect("network serializes")
}

pub fn network_from_json(text: &str) -> Result<StreetNetwork, IoError> {
    check_version(text, NETWORK_VERSION)?;
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| json_error(text, e))?;
    Ok(StreetNetwork::new(file.nodes, file.edges)?)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<StreetNetwork, IoError> {
    network_from_json(&read_text(path.as_ref())?)
}

pub fn save_network(net: &StreetNetwork, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_text(path.as_ref(), &network_to_json(net))
}

#[derive(Serialize, Deserialize)]
struct GroupFile {
    profile: ProfileTemplate,
    count: i64,
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    version: u64,
    network: String,
    #[serde(default)]
    profiles: Vec<GroupFile>,
    #[serde(default)]
    human_slots: i64,
    exit_node: NodeId,
    ticks: i64,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    slip_probability: Option<f64>,
    #[serde(default)]
    discount: Option<f64>,
}

pub fn scenario_to_json(scenario: &Scenario) -> String {
    let file = ScenarioFile {
        version: SCENARIO_VERSION,
        network: scenario.network_path.clone(),
        profiles: scenario
            .profiles
            .iter()
            .map(|g| GroupFile { profile: g.profile.clone(), count: i64::from(g.count) })
            .collect(),
        human_slots: i64::from(scenario.human_slots),
        exit_node: scenario.exit_node,
        ticks: scenario.ticks as i64,
        seed: Some(scenario.seed),
        slip_probability: Some(scenario.slip_probability),
        discount: Some(scenario.discount),
    };
    serde_json::to_string_pretty(&file).expect("scenario serializes")
}

/// Parses a scenario; its network path is resolved against `base_dir`.
pub fn scenario_from_json(text: &str, base_dir: &Path) -> Result<Scenario, IoError> {
    check_version(text, SCENARIO_VERSION)?;
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| json_error(text, e))?;
    let seed = file.seed.ok_or_else(|| IoError::InvalidScenario("seed required".into()))?;
    let count = |what: &str, n: i64| {
        u32::try_from(n).map_err(|_| IoError::InvalidScenario(format!("{what} must be a non-negative 32-bit count, got {n}")))
    };
    let mut profiles = Vec::with_capacity(file.profiles.len());
    for (i, g) in file.profiles.into_iter().enumerate() {
        profiles.push(ProfileGroup { profile: g.profile, count: count(&format!("profiles[{i}].count"), g.count)? });
    }
    let human_slots = count("human_slots", file.human_slots)?;
    let ticks = u64::try_from(file.ticks)
        .map_err(|_| IoError::InvalidScenario(format!("ticks must be non-negative, got {}", file.ticks)))?;
    let network = load_network(base_dir.join(&file.network))?;
    let scenario = Scenario {
        network: Arc::new(network),
        network_path: file.network,
        profiles,
        human_slots,
        exit_node: file.exit_node,
        ticks,
        seed,
        slip_probability: file.slip_probability.unwrap_or(DEFAULT_SLIP),
        discount: file.discount.unwrap_or(DEFAULT_DISCOUNT),
    };
    scenario.validate().map_err(|e| IoError::InvalidScenario(e.to_string()))?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, IoError> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    scenario_from_json(&read_text(path)?, base)
}

/// Writes the scenario file only; its network is expected at `network_path`.
pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_text(path.as_ref(), &scenario_to_json(scenario))
}

fn log_header(log: &TrajectoryLog) -> String {
    format!("{LOG_MAGIC} {LOG_VERSION} generator={} seed={}", log.generator, log.seed)
}

pub fn format_log(log: &TrajectoryLog) -> String {
    let mut out = String::with_capacity(16 * (log.len() + 4));
    out.push_str(&log_header(log));
    out.push('\n');
    for e in &log.entries {
        writeln!(out, "{} {} {} {} {}", e.tick, e.agent_id, e.source.code(), e.state, e.action).expect("string write");
    }
    out
}

pub fn write_log_to(log: &TrajectoryLog, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(format_log(log).as_bytes())
}

pub fn write_log(log: &TrajectoryLog, path: impl AsRef<Path>) -> Result<(), IoError> {
    write_text(path.as_ref(), &format_log(log))
}

fn parse_header(line: &str) -> Result<(String, u64), IoError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let [magic, version, generator, seed] = fields[..] else {
        return Err(IoError::at_line(1, format!("malformed header {line:?}")));
    };
    if magic != LOG_MAGIC || version != LOG_VERSION {
        return Err(IoError::at_line(1, format!("expected \"{LOG_MAGIC} {LOG_VERSION}\" header")));
    }
    let generator = generator
        .strip_prefix("generator=")
        .filter(|g| !g.is_empty())
        .ok_or_else(|| IoError::at_line(1, "header lacks generator="))?;
    let seed = seed
        .strip_prefix("seed=")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IoError::at_line(1, "header lacks a numeric seed="))?;
    Ok((generator.to_string(), seed))
}

fn parse_entry(line: &str, line_no: usize) -> Result<LogEntry, IoError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(IoError::at_line(line_no, format!("expected 5 fields, found {}", fields.len())));
    }
    let num = |i: usize, name: &str| -> Result<u64, IoError> {
        fields[i].parse().map_err(|_| IoError::at_line(line_no, format!("{name} {:?} is not an integer", fields[i])))
    };
    let narrow = |v: u64, name: &str| -> Result<u32, IoError> {
        u32::try_from(v).map_err(|_| IoError::at_line(line_no, format!("{name} {v} out of range")))
    };
    let code = narrow(num(2, "source")?, "source")?;
    let source = u8::try_from(code)
        .ok()
        .and_then(Source::from_code)
        .ok_or_else(|| IoError::at_line(line_no, format!("unknown source code {code}")))?;
    Ok(LogEntry {
        tick: num(0, "tick")?,
        agent_id: narrow(num(1, "agent_id")?, "agent_id")?,
        source,
        state: narrow(num(3, "state")?, "state")?,
        action: narrow(num(4, "action")?, "action")?,
    })
}

pub fn read_log_from(input: impl BufRead) -> Result<TrajectoryLog, IoError> {
    let mut lines = input.lines().enumerate();
    let stdin_path = Path::new("<log>");
    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| IoError::io(stdin_path, e))?,
        None => return Err(IoError::at_line(1, "missing header line")),
    };
    let (generator, seed) = parse_header(&header)?;
    let mut log = TrajectoryLog::new(seed);
    log.generator = generator;
    for (i, line) in lines {
        let line = line.map_err(|e| IoError::io(stdin_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        log.push(parse_entry(&line, i + 1)?);
    }
    Ok(log)
}

pub fn parse_log(text: &str) -> Result<TrajectoryLog, IoError> {
    read_log_from(text.as_bytes())
}

pub fn read_log(path: impl AsRef<Path>) -> Result<TrajectoryLog, IoError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| IoError::io(path, e))?;
    read_log_from(BufReader::new(file)).map_err(|e| match e {
        IoError::Io { source, .. } => IoError::io(path, source),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogViolation {
    OutOfOrder { index: usize },
    StateOutOfRange { index: usize },
    IllegalAction { index: usize },
}

/// Checks ordering by (tick, agent_id) and that each action is legal at its
/// state. Consecutive entries may share a key when a fast agent moves
/// several edges within one tick.
pub fn validate_log(log: &TrajectoryLog, compilation: &MdpCompilation) -> Result<(), Vec<LogViolation>> {
    let mut violations = Vec::new();
    for (i, e) in log.entries.iter().enumerate() {
        if i > 0 {
            let prev = &log.entries[i - 1];
            if (prev.tick, prev.agent_id) > (e.tick, e.agent_id) {
                violations.push(LogViolation::OutOfOrder { index: i });
            }
        }
        let state = e.state as usize;
        if state >= compilation.n_states() {
            violations.push(LogViolation::StateOutOfRange { index: i });
        } else if !compilation.is_legal_action(state, e.action as usize) {
            violations.push(LogViolation::IllegalAction { index: i });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct GpsPoint {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GpsTrace {
    pub points: Vec<GpsPoint>,
}

/// Parses `timestamp,x,y` CSV with a mandatory header row.
pub fn parse_gps_csv(text: &str) -> Result<GpsTrace, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::at_line(1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["timestamp", "x", "y"] {
        return Err(IoError::at_line(1, "expected header row \"timestamp,x,y\""));
    }
    let mut points: Vec<GpsPoint> = Vec::new();
    for record in reader.deserialize() {
        let point: GpsPoint = record.map_err(|e: csv::Error| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            IoError::at_line(line, e.to_string())
        })?;
        let line = points.len() + 2;
        if ![point.timestamp, point.x, point.y].iter().all(|v| v.is_finite()) {
            return Err(IoError::at_line(line, "non-finite value"));
        }
        if points.last().is_some_and(|p| p.timestamp >= point.timestamp) {
            return Err(IoError::at_line(line, "timestamps must be strictly increasing"));
        }
        points.push(point);
    }
    Ok(GpsTrace { points })
}

pub fn read_gps_csv(path: impl AsRef<Path>) -> Result<GpsTrace, IoError> {
    parse_gps_csv(&read_text(path.as_ref())?)
}

/// Node sequence (state indices) a trace maps to: snap each point to its
/// nearest node, drop repeats, and fill gaps with shortest paths.
pub fn snap_trace(trace: &GpsTrace, net: &StreetNetwork) -> Result<Vec<usize>, IoError> {
    if trace.points.is_empty() {
        return Err(IoError::EmptyTrace);
    }
    let mut nodes: Vec<usize> = Vec::new();
    for p in &trace.points {
        let node = net.nearest_node(p.x, p.y);
        match nodes.last() {
            Some(&last) if last == node => {}
            Some(&last) if net.edge_length(last, node).is_none() => {
                let path = net.shortest_path(last, node).expect("networks are connected");
                nodes.extend_from_slice(&path[1..]);
            }
            _ => nodes.push(node),
        }
    }
    Ok(nodes)
}

pub fn ingest_gps(trace: &GpsTrace, net: &StreetNetwork, compilation: &MdpCompilation) -> Result<Trajectory, IoError> {
    let states = snap_trace(trace, net)?;
    let actions = states
        .windows(2)
        .map(|w| compilation.action_between(w[0], w[1]).expect("consecutive snapped nodes are adjacent"))
        .collect();
    Ok(Trajectory { source: Source::Gps, states, actions })
}

/// Appends a trajectory under a fresh agent id starting at tick 0 and
/// restores log order. Returns the agent id used.
pub fn append_to_log(log: &mut TrajectoryLog, trajectory: &Trajectory) -> u32 {
    let id = log.next_agent_id();
    log.append_trajectory(trajectory, id, 0);
    log.sort();
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{compile_mdp, generate_network};

    fn grid() -> StreetNetwork {
        // 0 - 1 - 2 on a line, 3 above 0
        let nodes = vec![
            Node { id: 0, x: 0.0, y: 0.0, building: None },
            Node { id: 1, x: 10.0, y: 0.0, building: None },
            Node { id: 2, x: 20.0, y: 0.0, building: None },
            Node { id: 3, x: 0.0, y: 10.0, building: None },
        ];
        let edges = vec![
            Edge { from: 0, to: 1, length: 10.0 },
            Edge { from: 1, to: 2, length: 10.0 },
            Edge { from: 0, to: 3, length: 10.0 },
        ];
        StreetNetwork::new(nodes, edges).unwrap()
    }

    #[test]
    fn network_round_trip() {
        let net = generate_network(10, 3, 4);
        assert_eq!(network_from_json(&network_to_json(&net)).unwrap(), net);
    }

    #[test]
    fn truncated_network_reports_offset() {
        let text = network_to_json(&generate_network(10, 3, 4));
        let cut = &text[..text.len() / 2];
        match network_from_json(cut) {
            Err(IoError::Parse { offset, .. }) => assert!(offset > 0 && offset <= cut.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_version_rejected() {
        let text = network_to_json(&grid()).replace("\"version\": 1", "\"version\": 99");
        assert!(matches!(network_from_json(&text), Err(IoError::SchemaVersionMismatch { found: 99, .. })));
    }

    #[test]
    fn empty_log_is_header_only() {
        let log = TrajectoryLog::new(5);
        assert_eq!(format_log(&log), "wayward-log v1 generator=chacha8 seed=5\n");
        assert_eq!(parse_log(&format_log(&log)).unwrap(), log);
    }

    #[test]
    fn short_log_line_reports_line_number() {
        let text = "wayward-log v1 generator=chacha8 seed=5\n0 0 0 1 1\n1 0 0 1\n";
        assert!(matches!(parse_log(text), Err(IoError::Parse { line: 3, .. })));
    }

    #[test]
    fn gps_header_required() {
        assert!(matches!(parse_gps_csv("0,1,2\n1,2,3\n"), Err(IoError::Parse { line: 1, .. })));
        assert!(matches!(parse_gps_csv("timestamp,x,y\n1,0,0\n1,0,0\n"), Err(IoError::Parse { line: 3, .. })));
    }

    #[test]
    fn single_point_on_node() {
        let net = grid();
        let c = compile_mdp(&net, 0.0, 0.9).unwrap();
        let trace = GpsTrace { points: vec![GpsPoint { timestamp: 0.0, x: 0.0, y: 10.0 }] };
        let t = ingest_gps(&trace, &net, &c).unwrap();
        assert_eq!(t.states, vec![3]);
        assert!(t.actions.is_empty());
        assert_eq!(t.source, Source::Gps);
    }

    #[test]
    fn duplicates_collapse_and_gaps_bridge() {
        let net = grid();
        let c = compile_mdp(&net, 0.0, 0.9).unwrap();
        let pts = [(0.0, 10.0), (0.5, 9.0), (20.0, 0.0)];
        let trace = GpsTrace {
            points: pts.iter().enumerate().map(|(t, &(x, y))| GpsPoint { timestamp: t as f64, x, y }).collect(),
        };
        let t = ingest_gps(&trace, &net, &c).unwrap();
        assert_eq!(t.states, vec![3, 0, 1, 2]);
        assert_eq!(t.actions.len(), 3);
        assert!(matches!(ingest_gps(&GpsTrace::default(), &net, &c), Err(IoError::EmptyTrace)));
    }
}
