//! Rule-based pedestrian behaviour: schedules, distraction by nearby
//! buildings, and the internal clock.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::network::{Building, BuildingKind, NodeId, Router, StreetNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncomeBand {
    Low,
    Mid,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityKind {
    Shopping,
    Working,
    Leisure,
}

impl fmt::Display for IncomeBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IncomeBand::Low => "low",
            IncomeBand::Mid => "mid",
            IncomeBand::High => "high",
        })
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::Other => "other",
        })
    }
}

pub const INCOME_BANDS: [IncomeBand; 3] = [IncomeBand::Low, IncomeBand::Mid, IncomeBand::High];
pub const GENDERS: [Gender; 3] = [Gender::Female, Gender::Male, Gender::Other];

/// Attractiveness lookup key, e.g. `"low-female"`.
pub fn demographic_key(income: IncomeBand, gender: Gender) -> String {
    format!("{income}-{gender}")
}

/// How well an activity matches a building type.
pub fn activity_match(activity: ActivityKind, kind: BuildingKind) -> f64 {
    use ActivityKind::*;
    use BuildingKind::*;
    match (activity, kind) {
        (Shopping, Shop) => 1.0,
        (Shopping, BuildingKind::Public) => 0.3,
        (Shopping, Office) => 0.1,
        (Working, Office) => 1.0,
        (Working, _) => 0.1,
        (Leisure, BuildingKind::Public) => 1.0,
        (Leisure, Shop) => 0.5,
        (Leisure, Office) => 0.1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub income_band: IncomeBand,
    pub gender: Gender,
    pub activity: ActivityKind,
    /// Edge moves per tick, 1 or 2.
    pub speed: u8,
    /// Perception radius in edge hops.
    pub visual_range: u32,
    /// Resistance to distraction in `[0, 1]`.
    pub fixation: f64,
    /// Target node ids, visited in order.
    pub schedule: Vec<NodeId>,
    /// Ticks the agent stays in the system.
    pub total_time: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("speed {0} not in {{1, 2}}")]
    Speed(u8),
    #[error("fixation {0} outside [0, 1]")]
    Fixation(f64),
    #[error("schedule is empty")]
    EmptySchedule,
    #[error("total_time must be positive")]
    NoTime,
    #[error("schedule target {0} is not a network node")]
    UnknownTarget(NodeId),
}

impl AgentProfile {
    pub fn demographic(&self) -> String {
        demographic_key(self.income_band, self.gender)
    }

    pub fn validate(&self, net: &StreetNetwork) -> Result<(), ProfileError> {
        if !(1..=2).contains(&self.speed) {
            return Err(ProfileError::Speed(self.speed));
        }
        if !(0.0..=1.0).contains(&self.fixation) {
            return Err(ProfileError::Fixation(self.fixation));
        }
        if self.schedule.is_empty() {
            return Err(ProfileError::EmptySchedule);
        }
        if self.total_time == 0 {
            return Err(ProfileError::NoTime);
        }
        if let Some(&t) = self.schedule.iter().find(|&&t| net.index_of(t).is_none()) {
            return Err(ProfileError::UnknownTarget(t));
        }
        Ok(())
    }
}

/// Live position and clock of one agent. Node fields are network indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentState {
    pub node: usize,
    pub schedule_index: usize,
    pub remaining_time: u32,
    pub deviating_to: Option<usize>,
    /// Buildings already visited on a detour; each distracts at most once.
    pub visited: BTreeSet<usize>,
}

impl AgentState {
    pub fn new(node: usize, remaining_time: u32) -> Self {
        Self { node, schedule_index: 0, remaining_time, deviating_to: None, visited: BTreeSet::new() }
    }
}

/// Chance of being drawn into `building`: activity match × attractiveness
/// for the agent's demographic × (1 − fixation) × remaining-time fraction.
pub fn deviation_probability(
    profile: &AgentProfile,
    building: &Building,
    activity: ActivityKind,
    remaining_fraction: f64,
) -> f64 {
    let p = activity_match(activity, building.kind)
        * building.attractiveness_for(&profile.demographic())
        * (1.0 - profile.fixation)
        * remaining_fraction;
    p.clamp(0.0, 1.0)
}

/// Routing tables and precomputed sightlines shared by every agent.
#[derive(Debug, Clone)]
pub struct Navigator {
    router: Router,
    /// Per node: building nodes within the widest visual range, with hop count.
    sightlines: Vec<Vec<(usize, usize)>>,
    max_range: usize,
    exit: usize,
}

impl Navigator {
    /// Prepares routes toward every building, `exit`, and `extra_targets`.
    pub fn new(
        net: &StreetNetwork,
        exit: usize,
        extra_targets: impl IntoIterator<Item = usize>,
        max_range: usize,
    ) -> Self {
        let targets: BTreeSet<usize> = net
            .building_nodes()
            .chain(std::iter::once(exit))
            .chain(extra_targets)
            .collect();
        let router = Router::new(net, targets);
        let sightlines = (0..net.len())
            .map(|u| {
                if max_range == 0 {
                    return Vec::new();
                }
                net.within_hops(u, max_range)
                    .into_iter()
                    .filter(|&(v, _)| net.node(v).building.is_some())
                    .collect()
            })
            .collect();
        Self { router, sightlines, max_range, exit }
    }

    pub fn exit(&self) -> usize {
        self.exit
    }

    pub fn router(&self) -> &Router {
        &self.router
    }

    fn visible_buildings(&self, net: &StreetNetwork, node: usize, range: usize) -> Vec<usize> {
        if range <= self.max_range {
            self.sightlines[node].iter().filter(|&&(_, h)| h <= range).map(|&(v, _)| v).collect()
        } else {
            net.within_hops(node, range)
                .into_iter()
                .filter(|&(v, _)| net.node(v).building.is_some())
                .map(|(v, _)| v)
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Step to this neighboring node index.
    Move(usize),
    /// Schedule done and standing on the exit node.
    AtExit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStep {
    pub decision: Decision,
    /// Targets reached at the start of this step (schedule or detour).
    pub arrivals: Vec<usize>,
    /// Building picked for a detour this step.
    pub deviation: Option<usize>,
    /// The uniform draw used for the distraction test, if one was made.
    pub draw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreetsError {
    #[error("no path from node {from} to node {to}")]
    NoPathToTarget { from: NodeId, to: NodeId },
    #[error("schedule target {0} is not a network node")]
    UnknownTarget(NodeId),
}

/// Marks the current node as reached for the active detour and for any
/// consecutive schedule entries naming it. Returns the nodes reached.
pub fn consume_arrivals(
    agent: &mut AgentState,
    profile: &AgentProfile,
    net: &StreetNetwork,
) -> Result<Vec<usize>, StreetsError> {
    let mut arrivals = Vec::new();
    loop {
        if agent.deviating_to == Some(agent.node) {
            agent.deviating_to = None;
            agent.visited.insert(agent.node);
            arrivals.push(agent.node);
            continue;
        }
        let target = profile
            .schedule
            .get(agent.schedule_index)
            .map(|&id| net.index_of(id).ok_or(StreetsError::UnknownTarget(id)))
            .transpose()?;
        if agent.deviating_to.is_none() && target == Some(agent.node) {
            agent.schedule_index += 1;
            arrivals.push(agent.node);
            continue;
        }
        return Ok(arrivals);
    }
}

/// Decides one edge move for a rule-based agent.
///
/// Reached targets are consumed first. When `scan` is set and no detour is
/// active, a single uniform draw `u` is made if any unvisited building is in
/// sight; buildings are tried in ascending id order and the first with
/// `u < p` becomes the detour target. The agent then steps along the
/// shortest path toward its detour, its next schedule target, or the exit.
pub fn streets_policy_step<R: Rng + ?Sized>(
    agent: &mut AgentState,
    profile: &AgentProfile,
    net: &StreetNetwork,
    nav: &Navigator,
    rng: &mut R,
    scan: bool,
) -> Result<PolicyStep, StreetsError> {
    let arrivals = consume_arrivals(agent, profile, net)?;
    let schedule_target = |agent: &AgentState| -> Result<Option<usize>, StreetsError> {
        profile
            .schedule
            .get(agent.schedule_index)
            .map(|&id| net.index_of(id).ok_or(StreetsError::UnknownTarget(id)))
            .transpose()
    };
    let scheduled = schedule_target(agent)?;
    if agent.deviating_to.is_none() && scheduled.is_none() && agent.node == nav.exit {
        return Ok(PolicyStep { decision: Decision::AtExit, arrivals, deviation: None, draw: None });
    }

    let mut deviation = None;
    let mut draw = None;
    if scan && agent.deviating_to.is_none() {
        let candidates: Vec<usize> = nav
            .visible_buildings(net, agent.node, profile.visual_range as usize)
            .into_iter()
            .filter(|v| !agent.visited.contains(v) && Some(*v) != scheduled)
            .collect();
        if !candidates.is_empty() {
            let u: f64 = rng.gen();
            draw = Some(u);
            let remaining = f64::from(agent.remaining_time) / f64::from(profile.total_time);
            deviation = candidates.into_iter().find(|&v| {
                let building = net.node(v).building.as_ref().expect("building node");
                u < deviation_probability(profile, building, profile.activity, remaining.clamp(0.0, 1.0))
            });
            agent.deviating_to = deviation;
        }
    }

    let target = agent.deviating_to.or(scheduled).unwrap_or(nav.exit);
    let next = nav.router.next_hop(net, agent.node, target).ok_or(StreetsError::NoPathToTarget {
        from: net.id_of(agent.node),
        to: net.id_of(target),
    })?;
    Ok(PolicyStep { decision: Decision::Move(next), arrivals, deviation, draw })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::env::network::{Edge, Node};

    fn profile(fixation: f64) -> AgentProfile {
        AgentProfile {
            income_band: IncomeBand::Mid,
            gender: Gender::Female,
            activity: ActivityKind::Shopping,
            speed: 1,
            visual_range: 1,
            fixation,
            schedule: vec![5],
            total_time: 100,
        }
    }

    fn shop(id: u32, attractiveness: f64) -> Building {
        let attractiveness = INCOME_BANDS
            .iter()
            .flat_map(|&i| GENDERS.iter().map(move |&g| (demographic_key(i, g), attractiveness)))
            .collect::<BTreeMap<_, _>>();
        Building { id, kind: BuildingKind::Shop, attractiveness }
    }

    /// Path 0-1-2-3-4-5 with unit lengths; optional shop at node 1.
    fn path_net(shop_at: Option<(u32, f64)>) -> StreetNetwork {
        let nodes = (0..6)
            .map(|i| Node {
                id: i,
                x: i as f64,
                y: 0.0,
                building: shop_at.filter(|&(at, _)| at == i).map(|(_, a)| shop(100 + i, a)),
            })
            .collect();
        let edges = (0..5).map(|i| Edge { from: i, to: i + 1, length: 1.0 }).collect();
        StreetNetwork::new(nodes, edges).unwrap()
    }

    #[test]
    fn full_fixation_never_deviates() {
        let b = shop(1, 1.0);
        assert_eq!(deviation_probability(&profile(1.0), &b, ActivityKind::Shopping, 1.0), 0.0);
    }

    #[test]
    fn exhausted_clock_never_deviates() {
        let b = shop(1, 1.0);
        assert_eq!(deviation_probability(&profile(0.0), &b, ActivityKind::Shopping, 0.0), 0.0);
    }

    #[test]
    fn probability_is_product_of_factors() {
        let b = shop(1, 0.5);
        let p = deviation_probability(&profile(0.5), &b, ActivityKind::Shopping, 1.0);
        assert!((p - 0.25).abs() < 1e-15);
        let office = Building { kind: BuildingKind::Office, ..shop(2, 1.0) };
        assert!((deviation_probability(&profile(0.0), &office, ActivityKind::Shopping, 1.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn no_buildings_in_sight_walks_shortest_path() {
        let net = path_net(None);
        let nav = Navigator::new(&net, 0, [5], 1);
        let mut agent = AgentState::new(2, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let step = streets_policy_step(&mut agent, &profile(0.0), &net, &nav, &mut rng, true).unwrap();
        assert_eq!(step.decision, Decision::Move(3));
        assert_eq!(step.draw, None);
    }

    #[test]
    fn certain_deviation_to_adjacent_shop() {
        let net = path_net(Some((1, 1.0)));
        let nav = Navigator::new(&net, 0, [5], 1);
        let mut agent = AgentState::new(2, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let step = streets_policy_step(&mut agent, &profile(0.0), &net, &nav, &mut rng, true).unwrap();
        assert_eq!(step.deviation, Some(1));
        assert_eq!(agent.deviating_to, Some(1));
        assert_eq!(step.decision, Decision::Move(1));
        // arriving clears the detour and resumes toward the schedule
        agent.node = 1;
        let step = streets_policy_step(&mut agent, &profile(0.0), &net, &nav, &mut rng, true).unwrap();
        assert_eq!(step.arrivals, vec![1]);
        assert_eq!(agent.deviating_to, None);
        assert_eq!(step.decision, Decision::Move(2));
    }

    #[test]
    fn seeded_deviation_matches_replayed_draw() {
        let net = path_net(Some((1, 1.0)));
        let nav = Navigator::new(&net, 0, [5], 1);
        let prof = profile(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut replay = rng.clone();
        let building = net.node(1).building.clone().unwrap();
        for remaining in [100, 80, 60, 40, 20, 1] {
            let mut agent = AgentState::new(2, remaining);
            let expected_u: f64 = replay.gen();
            let p = deviation_probability(&prof, &building, ActivityKind::Shopping, remaining as f64 / 100.0);
            let step = streets_policy_step(&mut agent, &prof, &net, &nav, &mut rng, true).unwrap();
            assert_eq!(step.draw, Some(expected_u));
            assert_eq!(step.deviation.is_some(), expected_u < p);
        }
    }

    #[test]
    fn schedule_completion_heads_to_exit() {
        let net = path_net(None);
        let nav = Navigator::new(&net, 0, [5], 0);
        let mut agent = AgentState::new(5, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let step = streets_policy_step(&mut agent, &profile(1.0), &net, &nav, &mut rng, true).unwrap();
        assert_eq!(step.arrivals, vec![5]);
        assert_eq!(agent.schedule_index, 1);
        assert_eq!(step.decision, Decision::Move(4));
        agent.node = 0;
        let step = streets_policy_step(&mut agent, &profile(1.0), &net, &nav, &mut rng, true).unwrap();
        assert_eq!(step.decision, Decision::AtExit);
    }
}
