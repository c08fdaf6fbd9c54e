//! Demonstration records: the append-only trajectory log and single trajectories.

use serde::{Deserialize, Serialize};

/// Name of the generator recorded in log headers.
pub const GENERATOR_NAME: &str = "chacha8";

/// Where a logged step came from. The discriminant is the on-disk code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Virtual = 0,
    Human = 1,
    Gps = 2,
}

impl Source {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Source::Virtual),
            1 => Some(Source::Human),
            2 => Some(Source::Gps),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LogEntry {
    pub tick: u64,
    pub agent_id: u32,
    pub source: Source,
    pub state: u32,
    pub action: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryLog {
    pub generator: String,
    pub seed: u64,
    pub entries: Vec<LogEntry>,
}

impl TrajectoryLog {
    pub fn new(seed: u64) -> Self {
        Self { generator: GENERATOR_NAME.to_string(), seed, entries: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn push(&mut self, entry: LogEntry) {
        self.entries.push(entry);
    }

    /// True when entries are in nondecreasing `(tick, agent_id)` order.
    pub fn is_sorted(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| (w[0].tick, w[0].agent_id) <= (w[1].tick, w[1].agent_id))
    }

    /// Stable sort by `(tick, agent_id)`.
    pub fn sort(&mut self) {
        self.entries.sort_by_key(|e| (e.tick, e.agent_id));
    }

    pub fn count_source(&self, source: Source) -> usize {
        self.entries.iter().filter(|e| e.source == source).count()
    }

    /// One past the largest agent id in the log, or 0 when empty.
    pub fn next_agent_id(&self) -> u32 {
        self.entries.iter().map(|e| e.agent_id + 1).max().unwrap_or(0)
    }

    /// Appends `trajectory` under `agent_id`, ticks counted from `start_tick`,
    /// and restores the `(tick, agent_id)` ordering.
    pub fn append_trajectory(&mut self, trajectory: &Trajectory, agent_id: u32, start_tick: u64) {
        for (i, (&s, &a)) in trajectory.states.iter().zip(&trajectory.actions).enumerate() {
            self.entries.push(LogEntry {
                tick: start_tick + i as u64,
                agent_id,
                source: trajectory.source,
                state: s as u32,
                action: a as u32,
            });
        }
        self.sort();
    }
}

/// A state sequence with the actions taken between consecutive states, so
/// `states.len() == actions.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub source: Source,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}
