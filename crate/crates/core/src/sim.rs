//! Discrete-time multiagent simulation with trajectory logging.
//!
//! All agents act once per tick in ascending id order, drawing from a single
//! seeded ChaCha8 stream, so a scenario and its seed fully determine the log.
//! Human agents act only through queued actions injected between ticks.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{
    consume_arrivals, streets_policy_step, ActivityKind, AgentProfile, AgentState, Decision, Gender, IncomeBand, MdpCompilation,
    Navigator, NodeId, StreetNetwork, StreetsError,
};
use crate::mdp::Policy;
use crate::trajectory::{LogEntry, Source, TrajectoryLog};

pub const DEFAULT_SLIP: f64 = 0.05;
pub const DEFAULT_DISCOUNT: f64 = 0.95;
pub const DEFAULT_SCHEDULE_LENGTH: usize = 3;

/// Profile of a group of virtual agents. When `schedule` is absent each
/// agent gets `schedule_length` targets sampled among buildings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTemplate {
    pub income_band: IncomeBand,
    pub gender: Gender,
    pub activity: ActivityKind,
    pub speed: u8,
    pub visual_range: u32,
    pub fixation: f64,
    pub total_time: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<NodeId>>,
    #[serde(default = "default_schedule_length")]
    pub schedule_length: usize,
}

fn default_schedule_length() -> usize {
    DEFAULT_SCHEDULE_LENGTH
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGroup {
    pub profile: ProfileTemplate,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Arc<StreetNetwork>,
    /// Network file as referenced from the scenario file.
    pub network_path: String,
    pub profiles: Vec<ProfileGroup>,
    pub human_slots: u32,
    pub exit_node: NodeId,
    pub ticks: u64,
    pub seed: u64,
    pub slip_probability: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unknown agent {0}")]
    UnknownAgent(u32),
    #[error("agent {0} is not a human agent")]
    NotHumanAgent(u32),
    #[error("agent {0} is not active")]
    InactiveAgent(u32),
    #[error("action {action} is not legal at node {node}")]
    InvalidAction { action: usize, node: NodeId },
    #[error(transparent)]
    Streets(#[from] StreetsError),
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidScenario(msg));
        if self.network.index_of(self.exit_node).is_none() {
            return invalid(format!("exit node {} is not in the network", self.exit_node));
        }
        if !(0.0..0.5).contains(&self.slip_probability) {
            return invalid(format!("slip_probability {} outside [0, 0.5)", self.slip_probability));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return invalid(format!("discount {} outside [0, 1)", self.discount));
        }
        for (i, group) in self.profiles.iter().enumerate() {
            let p = &group.profile;
            let probe = AgentProfile {
                income_band: p.income_band,
                gender: p.gender,
                activity: p.activity,
                speed: p.speed,
                visual_range: p.visual_range,
                fixation: p.fixation,
                schedule: p.schedule.clone().unwrap_or_else(|| vec![self.exit_node]),
                total_time: p.total_time,
            };
            if let Err(e) = probe.validate(&self.network) {
                return invalid(format!("profile {i}: {e}"));
            }
            if p.schedule.is_none() && p.schedule_length == 0 {
                return invalid(format!("profile {i}: schedule_length must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub id: u32,
    pub source: Source,
    /// `None` for human agents, who have no schedule.
    pub profile: Option<Arc<AgentProfile>>,
    pub state: AgentState,
    pub active: bool,
    /// Whether the agent has ever entered the world; human slots start unspawned.
    pub spawned: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeactivationReason {
    TimeExhausted,
    Exited,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Arrived { agent_id: u32, node_id: NodeId },
    Deviated { agent_id: u32, node_id: NodeId },
    Deactivated { agent_id: u32, reason: DeactivationReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentView {
    pub agent_id: u32,
    pub source: Source,
    pub node_id: NodeId,
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickSnapshot {
    pub tick: u64,
    pub agents: Vec<AgentView>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone)]
pub struct World {
    tick: u64,
    agents: Vec<AgentRecord>,
    rng: ChaCha8Rng,
    log: TrajectoryLog,
    network: Arc<StreetNetwork>,
    navigator: Navigator,
    pending: BTreeMap<u32, usize>,
    refined_policy: Option<Policy>,
}

fn sample_schedule<R: Rng>(net: &StreetNetwork, demographic: &str, len: usize, rng: &mut R) -> Vec<NodeId> {
    let buildings: Vec<usize> = net.building_nodes().collect();
    let weights: Vec<f64> = buildings
        .iter()
        .map(|&b| net.node(b).building.as_ref().map_or(0.0, |b| b.attractiveness_for(demographic)))
        .collect();
    match WeightedIndex::new(&weights) {
        Ok(dist) => (0..len).map(|_| net.id_of(buildings[dist.sample(rng)])).collect(),
        // no building or all weights zero
        Err(_) => (0..len).map(|_| net.id_of(rng.gen_range(0..net.len()))).collect(),
    }
}

/// Instantiates every virtual agent and reserves the human slots.
///
/// Draw order on the scenario's generator: for each virtual agent in id
/// order its start node then its sampled schedule; then one start node per
/// human slot.
pub fn init_world(scenario: &Scenario) -> Result<World, SimError> {
    scenario.validate()?;
    let net = &scenario.network;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut agents = Vec::new();
    for group in &scenario.profiles {
        let t = &group.profile;
        for _ in 0..group.count {
            let start = rng.gen_range(0..net.len());
            let demographic = crate::env::demographic_key(t.income_band, t.gender);
            let schedule = match &t.schedule {
                Some(s) => s.clone(),
                None => sample_schedule(net, &demographic, t.schedule_length, &mut rng),
            };
            let profile = AgentProfile {
                income_band: t.income_band,
                gender: t.gender,
                activity: t.activity,
                speed: t.speed,
                visual_range: t.visual_range,
                fixation: t.fixation,
                schedule,
                total_time: t.total_time,
            };
            agents.push(AgentRecord {
                id: agents.len() as u32,
                source: Source::Virtual,
                state: AgentState::new(start, profile.total_time),
                profile: Some(Arc::new(profile)),
                active: true,
                spawned: true,
            });
        }
    }
    let human_time = u32::try_from(scenario.ticks).unwrap_or(u32::MAX).max(1);
    for _ in 0..scenario.human_slots {
        let start = rng.gen_range(0..net.len());
        agents.push(AgentRecord {
            id: agents.len() as u32,
            source: Source::Human,
            profile: None,
            state: AgentState::new(start, human_time),
            active: false,
            spawned: false,
        });
    }

    let exit = net.index_of(scenario.exit_node).expect("validated");
    let targets: Vec<usize> = agents
        .iter()
        .filter_map(|a| a.profile.as_ref())
        .flat_map(|p| p.schedule.iter().filter_map(|&id| net.index_of(id)))
        .collect();
    let max_range = agents
        .iter()
        .filter_map(|a| a.profile.as_ref())
        .map(|p| p.visual_range as usize)
        .max()
        .unwrap_or(0);
    let navigator = Navigator::new(net, exit, targets, max_range);
    Ok(World {
        tick: 0,
        agents,
        rng,
        log: TrajectoryLog::new(scenario.seed),
        network: Arc::clone(net),
        navigator,
        pending: BTreeMap::new(),
        refined_policy: None,
    })
}

impl World {
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn agents(&self) -> &[AgentRecord] {
        &self.agents
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.log
    }

    pub fn network(&self) -> &Arc<StreetNetwork> {
        &self.network
    }

    pub fn active_count(&self) -> usize {
        self.agents.iter().filter(|a| a.active).count()
    }

    pub fn refined_policy(&self) -> Option<&Policy> {
        self.refined_policy.as_ref()
    }

    /// Canonical encoding of the mutable world state: tick, every agent
    /// record, queued actions, and the generator position.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut out = format!("tick={} rng_word={}\n", self.tick, self.rng.get_word_pos()).into_bytes();
        for a in &self.agents {
            out.extend(format!("{a:?}\n").bytes());
        }
        out.extend(format!("{:?}\n", self.pending).bytes());
        out
    }

    pub fn snapshot(&self, events: Vec<Event>) -> TickSnapshot {
        TickSnapshot {
            tick: self.tick,
            agents: self
                .agents
                .iter()
                .map(|a| AgentView {
                    agent_id: a.id,
                    source: a.source,
                    node_id: self.network.id_of(a.state.node),
                    active: a.active,
                })
                .collect(),
            events,
        }
    }

    fn human(&mut self, agent_id: u32) -> Result<&mut AgentRecord, SimError> {
        let agent = self.agents.get_mut(agent_id as usize).ok_or(SimError::UnknownAgent(agent_id))?;
        if agent.source != Source::Human {
            return Err(SimError::NotHumanAgent(agent_id));
        }
        Ok(agent)
    }

    /// Lowest-id human slot that has never been occupied.
    pub fn free_human_slot(&self) -> Option<u32> {
        self.agents.iter().find(|a| a.source == Source::Human && !a.spawned).map(|a| a.id)
    }

    /// Brings a reserved human slot into the world at its preassigned node.
    pub fn activate_human(&mut self, agent_id: u32) -> Result<(), SimError> {
        let agent = self.human(agent_id)?;
        if agent.spawned {
            return Err(SimError::InvalidScenario(format!("human slot {agent_id} already used")));
        }
        agent.spawned = true;
        agent.active = true;
        Ok(())
    }

    /// Removes a human from play; the record stays for the log.
    pub fn deactivate_human(&mut self, agent_id: u32) -> Result<(), SimError> {
        let agent = self.human(agent_id)?;
        agent.active = false;
        self.pending.remove(&agent_id);
        Ok(())
    }

    /// Re-deploys every virtual agent, including those that already left,
    /// to follow `policy` from the next tick on. Each restarts where it
    /// stands with a full clock.
    pub fn redeploy(&mut self, policy: Policy) {
        self.refined_policy = Some(policy);
        for a in self.agents.iter_mut().filter(|a| a.source == Source::Virtual) {
            let profile = a.profile.as_ref().expect("virtual agents have profiles");
            a.state.deviating_to = None;
            a.state.remaining_time = profile.total_time;
            a.active = true;
        }
    }

    fn record(&mut self, agent_id: u32, source: Source, state: usize, action: usize) {
        self.log.push(LogEntry {
            tick: self.tick,
            agent_id,
            source,
            state: state as u32,
            action: action as u32,
        });
    }

    /// Advances one tick. See the module docs for ordering.
    pub fn step(&mut self, compilation: &MdpCompilation) -> Result<Vec<Event>, SimError> {
        let mut events = Vec::new();
        let net = Arc::clone(&self.network);
        let policy = self.refined_policy.take();
        for idx in 0..self.agents.len() {
            if !self.agents[idx].active {
                continue;
            }
            let id = self.agents[idx].id;
            match self.agents[idx].source {
                Source::Human | Source::Gps => {
                    let state = self.agents[idx].state.node;
                    let action = self.pending.remove(&id).unwrap_or_else(|| compilation.stay_action(state));
                    self.record(id, Source::Human, state, action);
                    self.agents[idx].state.node = compilation.successor(state, action);
                }
                Source::Virtual => {
                    let profile = Arc::clone(self.agents[idx].profile.as_ref().expect("virtual agents have profiles"));
                    if let Some(policy) = &policy {
                        for _ in 0..profile.speed {
                            let state = self.agents[idx].state.node;
                            let action = policy.action(state);
                            self.record(id, Source::Virtual, state, action);
                            self.agents[idx].state.node = compilation.successor(state, action);
                        }
                    } else {
                        match self.walk_rule_based(idx, &profile, &net, compilation, &mut events) {
                            Ok(true) => continue,
                            Ok(false) => {}
                            Err(e) => {
                                self.refined_policy = policy;
                                return Err(e);
                            }
                        }
                    }
                }
            }
            let agent = &mut self.agents[idx];
            agent.state.remaining_time = agent.state.remaining_time.saturating_sub(1);
            if agent.state.remaining_time == 0 {
                agent.active = false;
                self.pending.remove(&id);
                events.push(Event::Deactivated { agent_id: id, reason: DeactivationReason::TimeExhausted });
            }
        }
        self.refined_policy = policy;
        self.tick += 1;
        Ok(events)
    }

    /// Moves a rule-based agent `speed` edges. Returns true when it left
    /// through the exit.
    fn walk_rule_based(
        &mut self,
        idx: usize,
        profile: &AgentProfile,
        net: &StreetNetwork,
        compilation: &MdpCompilation,
        events: &mut Vec<Event>,
    ) -> Result<bool, SimError> {
        let id = self.agents[idx].id;
        for k in 0..profile.speed {
            let mut state = self.agents[idx].state.clone();
            let step = streets_policy_step(&mut state, profile, net, &self.navigator, &mut self.rng, k == 0)?;
            for node in step.arrivals {
                events.push(Event::Arrived { agent_id: id, node_id: net.id_of(node) });
            }
            if let Some(node) = step.deviation {
                events.push(Event::Deviated { agent_id: id, node_id: net.id_of(node) });
            }
            let from = state.node;
            match step.decision {
                Decision::AtExit => {
                    self.agents[idx].state = state;
                    self.exit(idx, events);
                    return Ok(true);
                }
                Decision::Move(next) => {
                    let action = compilation.action_between(from, next).expect("router follows edges");
                    self.record(id, Source::Virtual, from, action);
                    state.node = next;
                }
            }
            if state.node == self.navigator.exit() {
                for node in consume_arrivals(&mut state, profile, net)? {
                    events.push(Event::Arrived { agent_id: id, node_id: net.id_of(node) });
                }
                if state.deviating_to.is_none() && state.schedule_index >= profile.schedule.len() {
                    self.agents[idx].state = state;
                    self.exit(idx, events);
                    return Ok(true);
                }
            }
            self.agents[idx].state = state;
        }
        Ok(false)
    }

    fn exit(&mut self, idx: usize, events: &mut Vec<Event>) {
        let agent = &mut self.agents[idx];
        agent.active = false;
        events.push(Event::Deactivated { agent_id: agent.id, reason: DeactivationReason::Exited });
    }

    /// Applies `step` up to `ticks` times, stopping early once no agent is active.
    pub fn run(&mut self, compilation: &MdpCompilation, ticks: u64) -> Result<&TrajectoryLog, SimError> {
        for _ in 0..ticks {
            if self.active_count() == 0 {
                break;
            }
            self.step(compilation)?;
        }
        Ok(&self.log)
    }
}

/// Queues `action` for a human agent's next step; a later injection before
/// the step replaces it.
pub fn inject_human_action(
    world: &mut World,
    agent_id: u32,
    action: usize,
    compilation: &MdpCompilation,
) -> Result<(), SimError> {
    let agent = world.human(agent_id)?;
    if !agent.active {
        return Err(SimError::InactiveAgent(agent_id));
    }
    let node = agent.state.node;
    if !compilation.is_legal_action(node, action) {
        return Err(SimError::InvalidAction { action, node: compilation.node_of_state(node) });
    }
    world.pending.insert(agent_id, action);
    Ok(())
}

/// Rebuilds the snapshot sequence of a session from its scenario and log.
///
/// A human agent is taken to be present during every tick at which it has a
/// log entry; its logged action is injected before that tick's step. When
/// `refinement` is given, virtual agents switch to that policy at that tick.
/// Returns the initial snapshot followed by one snapshot per step.
pub fn replay_snapshots(
    scenario: &Scenario,
    compilation: &MdpCompilation,
    log: &TrajectoryLog,
    ticks: u64,
    refinement: Option<(u64, Policy)>,
) -> Result<Vec<TickSnapshot>, SimError> {
    let mut world = init_world(scenario)?;
    let mut by_tick: BTreeMap<u64, Vec<&LogEntry>> = BTreeMap::new();
    for e in log.entries.iter().filter(|e| e.source == Source::Human) {
        by_tick.entry(e.tick).or_default().push(e);
    }
    let mut refinement = refinement;
    let mut snapshots = vec![world.snapshot(Vec::new())];
    for _ in 0..ticks {
        let tick = world.tick;
        if refinement.as_ref().is_some_and(|(at, _)| *at == tick) {
            world.redeploy(refinement.take().expect("checked").1);
        }
        let present: BTreeMap<u32, usize> = by_tick
            .get(&tick)
            .map(|es| es.iter().map(|e| (e.agent_id, e.action as usize)).collect())
            .unwrap_or_default();
        let humans: Vec<u32> = world.agents.iter().filter(|a| a.source == Source::Human).map(|a| a.id).collect();
        for id in humans {
            let agent = &world.agents[id as usize];
            match present.get(&id) {
                Some(&action) => {
                    if !agent.spawned {
                        world.activate_human(id)?;
                    }
                    inject_human_action(&mut world, id, action, compilation)?;
                }
                None if agent.active => world.deactivate_human(id)?,
                None => {}
            }
        }
        let events = world.step(compilation)?;
        snapshots.push(world.snapshot(events));
    }
    Ok(snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{compile_mdp, Edge, Node};

    fn path_network(n: u32) -> Arc<StreetNetwork> {
        Arc::new(
            StreetNetwork::new(
                (0..n).map(|i| Node { id: i, x: i as f64 * 10.0, y: 0.0, building: None }).collect(),
                (0..n - 1).map(|i| Edge { from: i, to: i + 1, length: 10.0 }).collect(),
            )
            .unwrap(),
        )
    }

    fn template(schedule: Vec<NodeId>, total_time: u32) -> ProfileTemplate {
        ProfileTemplate {
            income_band: IncomeBand::Low,
            gender: Gender::Male,
            activity: ActivityKind::Working,
            speed: 1,
            visual_range: 0,
            fixation: 1.0,
            total_time,
            schedule: Some(schedule),
            schedule_length: 1,
        }
    }

    fn scenario(net: Arc<StreetNetwork>, groups: Vec<(ProfileTemplate, u32)>, humans: u32) -> Scenario {
        Scenario {
            network: net,
            network_path: "network.json".into(),
            profiles: groups.into_iter().map(|(profile, count)| ProfileGroup { profile, count }).collect(),
            human_slots: humans,
            exit_node: 0,
            ticks: 100,
            seed: 9,
            slip_probability: DEFAULT_SLIP,
            discount: DEFAULT_DISCOUNT,
        }
    }

    #[test]
    fn empty_world_steps_without_effect() {
        let sc = scenario(path_network(3), vec![], 0);
        let c = compile_mdp(&sc.network, sc.slip_probability, sc.discount).unwrap();
        let mut w = init_world(&sc).unwrap();
        assert!(w.agents().is_empty());
        assert!(w.step(&c).unwrap().is_empty());
        assert!(w.log().is_empty());
    }

    #[test]
    fn one_entry_per_speed_one_agent() {
        let sc = scenario(path_network(6), vec![(template(vec![5], 50), 5)], 0);
        let c = compile_mdp(&sc.network, sc.slip_probability, sc.discount).unwrap();
        let mut w = init_world(&sc).unwrap();
        w.step(&c).unwrap();
        let at_target = w.agents().iter().filter(|a| a.state.node == 5).count();
        assert_eq!(w.log().len(), 5);
        assert!(at_target <= 5);
        assert!(w.log().entries.iter().all(|e| e.tick == 0));
    }

    #[test]
    fn last_tick_of_clock_deactivates() {
        let sc = scenario(path_network(6), vec![(template(vec![5], 1), 1)], 0);
        let c = compile_mdp(&sc.network, sc.slip_probability, sc.discount).unwrap();
        let mut w = init_world(&sc).unwrap();
        let events = w.step(&c).unwrap();
        assert!(events.contains(&Event::Deactivated { agent_id: 0, reason: DeactivationReason::TimeExhausted }));
        assert!(!w.agents()[0].active);
    }

    #[test]
    fn human_slots_reserved_inactive() {
        let sc = scenario(path_network(6), vec![(template(vec![5], 10), 4)], 3);
        let w = init_world(&sc).unwrap();
        assert_eq!(w.agents().len(), 7);
        assert_eq!(w.agents().iter().filter(|a| a.source == Source::Human && !a.active).count(), 3);
        assert_eq!(w.free_human_slot(), Some(4));
    }

    #[test]
    fn human_injection_rules() {
        let sc = scenario(path_network(6), vec![(template(vec![5], 10), 1)], 2);
        let c = compile_mdp(&sc.network, sc.slip_probability, sc.discount).unwrap();
        let mut w = init_world(&sc).unwrap();
        assert_eq!(inject_human_action(&mut w, 9, 0, &c), Err(SimError::UnknownAgent(9)));
        assert_eq!(inject_human_action(&mut w, 0, 0, &c), Err(SimError::NotHumanAgent(0)));
        assert_eq!(inject_human_action(&mut w, 1, 0, &c), Err(SimError::InactiveAgent(1)));
        w.activate_human(1).unwrap();
        let node = w.agents()[1].state.node;
        let degree = c.degree(node);
        // padding slot past the stay action, only present at path endpoints
        if degree + 1 < c.n_actions() {
            let before = w.state_bytes();
            assert!(matches!(
                inject_human_action(&mut w, 1, degree + 1, &c),
                Err(SimError::InvalidAction { .. })
            ));
            assert_eq!(before, w.state_bytes());
        }
        inject_human_action(&mut w, 1, degree, &c).unwrap();
        inject_human_action(&mut w, 1, 0, &c).unwrap();
        w.step(&c).unwrap();
        let entry = w.log().entries.iter().find(|e| e.agent_id == 1).unwrap();
        assert_eq!(entry.source, Source::Human);
        assert_eq!(entry.action, 0, "latest injection wins");
        assert_eq!(w.agents()[1].state.node, c.successor(node, 0));
    }

    #[test]
    fn run_follows_shortest_path_and_stops_early() {
        let sc = scenario(path_network(8), vec![(template(vec![5], 100), 1)], 0);
        let c = compile_mdp(&sc.network, sc.slip_probability, sc.discount).unwrap();
        let mut w = init_world(&sc).unwrap();
        let start = w.agents()[0].state.node;
        w.run(&c, 100).unwrap();
        let states: Vec<u32> = w.log().entries.iter().map(|e| e.state).collect();
        // start -> 5 -> exit 0, one edge per tick
        let mut expected: Vec<u32> = if start <= 5 {
            (start as u32..5).collect()
        } else {
            (6..=start as u32).rev().collect()
        };
        expected.extend((1..=5).rev());
        assert_eq!(states, expected);
        assert_eq!(w.tick(), expected.len() as u64);
        assert_eq!(w.active_count(), 0);
    }

    #[test]
    fn zero_ticks_gives_empty_log() {
        let sc = scenario(path_network(4), vec![(template(vec![3], 10), 2)], 0);
        let c = compile_mdp(&sc.network, sc.slip_probability, sc.discount).unwrap();
        let mut w = init_world(&sc).unwrap();
        assert!(w.run(&c, 0).unwrap().is_empty());
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let mut sc = scenario(path_network(4), vec![(template(vec![3], 10), 2)], 0);
        sc.exit_node = 77;
        assert!(matches!(init_world(&sc), Err(SimError::InvalidScenario(_))));
        let sc = scenario(path_network(4), vec![(template(vec![42], 10), 2)], 0);
        assert!(matches!(init_world(&sc), Err(SimError::InvalidScenario(_))));
    }
}
