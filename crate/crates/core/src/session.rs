//! Participatory session logic, independent of any transport.
//!
//! A session owns one world and moves through four phases in order:
//! deductive (virtual agents only), participatory (from the first human
//! join), refining (world paused while the reward is recovered) and refined
//! (virtual agents follow the forward-optimal policy). Client frames are
//! JSON objects tagged by `"type"`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::env::{compile_mdp, MdpCompilation};
use crate::io::network_to_value;
use crate::irl::{
    estimate_policy, forward_policy, recover_reward, validate_recovery, IrlConfig, IrlError, RewardEstimate,
    ValidationReport,
};
use crate::mdp::Policy;
use crate::sim::{init_world, inject_human_action, Scenario, SimError, TickSnapshot, World};
use crate::trajectory::{Source, TrajectoryLog};

pub const DEFAULT_TICK_INTERVAL_MS: u64 = 200;

pub type ConnectionId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Deductive,
    Participatory,
    Refining,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Join,
    Act { action: usize },
    Leave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    Joined { agent_id: u32, network: Value },
    Tick { snapshot: TickSnapshot, skipped: u64 },
    Ack,
    Rejected { reason: String },
    Phase { phase: Phase },
    Refined { report: Value },
    Error { reason: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("no free human slot")]
    NoFreeSlot,
    #[error("unknown session")]
    UnknownSession,
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("the log holds no human-sourced entries")]
    NoHumanData,
    #[error("operation not allowed in phase {0:?}")]
    WrongPhase(Phase),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Irl(#[from] IrlError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleOutcome {
    pub reward: RewardEstimate,
    pub report: ValidationReport,
    pub refined_policy: Vec<usize>,
}

/// Everything the refinement solve needs, detached from the session so it
/// can run while the session keeps serving clients.
#[derive(Debug, Clone)]
pub struct RefinementJob {
    log: TrajectoryLog,
    compilation: Arc<MdpCompilation>,
    config: IrlConfig,
}

impl RefinementJob {
    pub fn solve(&self) -> Result<CycleOutcome, IrlError> {
        let mdp = &self.compilation.dynamics;
        let observed = estimate_policy(&self.log, mdp.n_states(), mdp.n_actions())?;
        let reward = recover_reward(mdp, &observed, &self.config)?;
        let report = validate_recovery(mdp, &reward, &observed)?;
        let policy = forward_policy(mdp, &reward.values)?;
        Ok(CycleOutcome { reward, report, refined_policy: policy.actions().to_vec() })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SessionStatus {
    pub phase: Phase,
    pub tick: u64,
    pub agents: usize,
    pub active_agents: usize,
    pub participants: usize,
    pub free_slots: usize,
    pub log_entries: usize,
}

#[derive(Debug, Clone)]
pub struct Session {
    phase: Phase,
    scenario: Scenario,
    world: World,
    compilation: Arc<MdpCompilation>,
    participants: BTreeMap<ConnectionId, u32>,
    latest: TickSnapshot,
    refinement: Option<(u64, Policy)>,
    outcome: Option<CycleOutcome>,
}

impl Session {
    pub fn new(scenario: Scenario) -> Result<Self, SessionError> {
        let invalid = |e: String| SessionError::InvalidScenario(e);
        let world = init_world(&scenario).map_err(|e| invalid(e.to_string()))?;
        let compilation = compile_mdp(&scenario.network, scenario.slip_probability, scenario.discount)
            .map_err(|e| invalid(e.to_string()))?;
        let latest = world.snapshot(Vec::new());
        Ok(Session {
            phase: Phase::Deductive,
            scenario,
            world,
            compilation: Arc::new(compilation),
            participants: BTreeMap::new(),
            latest,
            refinement: None,
            outcome: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn compilation(&self) -> &Arc<MdpCompilation> {
        &self.compilation
    }

    pub fn log(&self) -> &TrajectoryLog {
        self.world.log()
    }

    pub fn latest_snapshot(&self) -> &TickSnapshot {
        &self.latest
    }

    /// Tick and policy at which virtual agents were re-deployed, for replay.
    pub fn refinement(&self) -> Option<&(u64, Policy)> {
        self.refinement.as_ref()
    }

    pub fn outcome(&self) -> Option<&CycleOutcome> {
        self.outcome.as_ref()
    }

    pub fn agent_of(&self, connection: ConnectionId) -> Option<u32> {
        self.participants.get(&connection).copied()
    }

    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            phase: self.phase,
            tick: self.world.tick(),
            agents: self.world.agents().len(),
            active_agents: self.world.active_count(),
            participants: self.participants.len(),
            free_slots: self.world.agents().iter().filter(|a| a.source == Source::Human && !a.spawned).count(),
            log_entries: self.world.log().len(),
        }
    }

    /// Advances the world one step unless refinement has paused it.
    /// Returns the new snapshot, or `None` while paused.
    pub fn tick(&mut self) -> Option<&TickSnapshot> {
        if self.phase == Phase::Refining {
            return None;
        }
        let events = self.world.step(&self.compilation).expect("world state stays consistent with its network");
        self.latest = self.world.snapshot(events);
        Some(&self.latest)
    }

    /// Applies one JSON frame from `connection` and returns the replies to
    /// send, in order. A phase change is broadcast separately by the caller
    /// when `phase()` differs from before the call.
    pub fn handle_client_message(&mut self, connection: ConnectionId, frame: &str) -> Vec<ServerMessage> {
        let message: ClientMessage = match serde_json::from_str(frame) {
            Ok(m) => m,
            Err(e) => return vec![error_reply(&SessionError::MalformedMessage(e.to_string()))],
        };
        match message {
            ClientMessage::Join => match self.join(connection) {
                Ok(agent_id) => vec![ServerMessage::Joined { agent_id, network: network_to_value(&self.scenario.network) }],
                Err(e) => vec![error_reply(&e)],
            },
            ClientMessage::Act { action } => {
                let Some(agent_id) = self.agent_of(connection) else {
                    return vec![ServerMessage::Rejected { reason: "NotJoined".into() }];
                };
                match inject_human_action(&mut self.world, agent_id, action, &self.compilation) {
                    Ok(()) => vec![ServerMessage::Ack],
                    Err(e) => vec![ServerMessage::Rejected { reason: sim_reason(&e).into() }],
                }
            }
            ClientMessage::Leave => {
                self.leave(connection);
                vec![ServerMessage::Ack]
            }
        }
    }

    /// Binds `connection` to the lowest free human slot.
    pub fn join(&mut self, connection: ConnectionId) -> Result<u32, SessionError> {
        if let Some(agent_id) = self.agent_of(connection) {
            return Ok(agent_id);
        }
        let agent_id = self.world.free_human_slot().ok_or(SessionError::NoFreeSlot)?;
        self.world.activate_human(agent_id).expect("free slot is a human record");
        self.participants.insert(connection, agent_id);
        if self.phase == Phase::Deductive {
            self.phase = Phase::Participatory;
        }
        self.latest = self.world.snapshot(self.latest.events.clone());
        Ok(agent_id)
    }

    /// Deactivates the connection's agent; the slot is not reused.
    pub fn leave(&mut self, connection: ConnectionId) {
        if let Some(agent_id) = self.participants.remove(&connection) {
            self.world.deactivate_human(agent_id).expect("participant is a human record");
            self.latest = self.world.snapshot(self.latest.events.clone());
        }
    }

    /// Pauses the world and captures what the solve needs.
    pub fn begin_refinement(&mut self, config: IrlConfig) -> Result<RefinementJob, SessionError> {
        if self.phase != Phase::Participatory {
            return Err(SessionError::WrongPhase(self.phase));
        }
        config.validate()?;
        if self.world.log().count_source(Source::Human) == 0 {
            return Err(SessionError::NoHumanData);
        }
        self.phase = Phase::Refining;
        Ok(RefinementJob { log: self.world.log().clone(), compilation: Arc::clone(&self.compilation), config })
    }

    /// Re-deploys virtual agents on success. On failure the session still
    /// moves to refined, with virtual agents left on their rule-based policy.
    pub fn finish_refinement(&mut self, result: Result<CycleOutcome, IrlError>) -> Result<CycleOutcome, SessionError> {
        assert_eq!(self.phase, Phase::Refining, "finish_refinement without begin_refinement");
        self.phase = Phase::Refined;
        let outcome = result?;
        let policy = Policy::new(outcome.refined_policy.clone(), self.compilation.n_actions())
            .expect("forward policy fits the compilation");
        self.world.redeploy(policy.clone());
        self.refinement = Some((self.world.tick(), policy));
        self.outcome = Some(outcome.clone());
        Ok(outcome)
    }

    /// Synchronous refinement: begin, solve, finish.
    pub fn run_participatory_cycle(&mut self, config: IrlConfig) -> Result<CycleOutcome, SessionError> {
        let job = self.begin_refinement(config)?;
        let result = job.solve();
        self.finish_refinement(result)
    }
}

fn sim_reason(e: &SimError) -> &'static str {
    match e {
        SimError::UnknownAgent(_) => "UnknownAgent",
        SimError::NotHumanAgent(_) => "NotHumanAgent",
        SimError::InactiveAgent(_) => "InactiveAgent",
        SimError::InvalidAction { .. } => "InvalidAction",
        SimError::InvalidScenario(_) => "InvalidScenario",
        SimError::Streets(_) => "Internal",
    }
}

fn error_reply(e: &SessionError) -> ServerMessage {
    let reason = match e {
        SessionError::NoFreeSlot => "NoFreeSlot",
        SessionError::UnknownSession => "UnknownSession",
        SessionError::MalformedMessage(_) => "MalformedMessage",
        SessionError::NoHumanData => "NoHumanData",
        SessionError::WrongPhase(_) => "WrongPhase",
        SessionError::InvalidScenario(_) => "InvalidScenario",
        SessionError::Irl(_) => "IrlFailure",
    };
    ServerMessage::Error { reason: reason.into() }
}

/// Tracks what one subscriber has seen and conflates missed ticks.
#[derive(Debug, Clone, Default)]
pub struct Subscriber {
    last_tick: Option<u64>,
}

impl Subscriber {
    /// The frame to deliver for `latest`, or `None` if already delivered.
    /// `skipped` counts ticks produced since the previous delivery that the
    /// subscriber never saw.
    pub fn deliver(&mut self, latest: &TickSnapshot) -> Option<ServerMessage> {
        let skipped = match self.last_tick {
            Some(t) if latest.tick <= t => return None,
            Some(t) => latest.tick - t - 1,
            None => 0,
        };
        self.last_tick = Some(latest.tick);
        Some(ServerMessage::Tick { snapshot: latest.clone(), skipped })
    }
}
