use serde::Serialize;
use thiserror::Error;

use super::network::{NodeId, StreetNetwork};
use crate::mdp::{MdpDynamics, MdpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionTarget {
    Move(NodeId),
    Stay,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("slip probability {0} outside [0, 0.5)")]
    SlipOutOfRange(f64),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// A street network viewed as a finite MDP: one state per node (in id
/// order), action `k` moves to the `k`-th neighbor by id, and every action
/// at or past the node's degree stays put.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpCompilation {
    pub dynamics: MdpDynamics,
    node_ids: Vec<NodeId>,
    action_table: Vec<Vec<ActionTarget>>,
    degrees: Vec<usize>,
    neighbor_states: Vec<Vec<usize>>,
}

/// Moves succeed with probability `1 − slip` and otherwise leave the agent
/// in place; stay actions are deterministic.
pub fn compile_mdp(net: &StreetNetwork, slip_probability: f64, discount: f64) -> Result<MdpCompilation, CompileError> {
    if !(0.0..0.5).contains(&slip_probability) {
        return Err(CompileError::SlipOutOfRange(slip_probability));
    }
    let n = net.len();
    let n_actions = net.max_degree() + 1;
    let mut transitions = vec![0.0; n_actions * n * n];
    let mut action_table = Vec::with_capacity(n);
    let mut neighbor_states = Vec::with_capacity(n);
    for s in 0..n {
        let neighbors: Vec<usize> = net.neighbors(s).iter().map(|&(v, _)| v).collect();
        let mut row = Vec::with_capacity(n_actions);
        for a in 0..n_actions {
            let base = (a * n + s) * n;
            match neighbors.get(a) {
                Some(&v) => {
                    transitions[base + v] = 1.0 - slip_probability;
                    transitions[base + s] += slip_probability;
                    row.push(ActionTarget::Move(net.id_of(v)));
                }
                None => {
                    transitions[base + s] = 1.0;
                    row.push(ActionTarget::Stay);
                }
            }
        }
        action_table.push(row);
        neighbor_states.push(neighbors);
    }
    let dynamics = MdpDynamics::new(n, n_actions, transitions, discount)?;
    Ok(MdpCompilation {
        dynamics,
        node_ids: net.nodes().iter().map(|n| n.id).collect(),
        degrees: neighbor_states.iter().map(Vec::len).collect(),
        action_table,
        neighbor_states,
    })
}

impl MdpCompilation {
    pub fn n_states(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_actions(&self) -> usize {
        self.dynamics.n_actions()
    }

    pub fn node_of_state(&self, state: usize) -> NodeId {
        self.node_ids[state]
    }

    pub fn state_of_node(&self, id: NodeId) -> Option<usize> {
        self.node_ids.binary_search(&id).ok()
    }

    pub fn action_table(&self, state: usize) -> &[ActionTarget] {
        &self.action_table[state]
    }

    pub fn degree(&self, state: usize) -> usize {
        self.degrees[state]
    }

    /// Canonical stay action at `state` (the first padding slot).
    pub fn stay_action(&self, state: usize) -> usize {
        self.degrees[state]
    }

    /// A real move or the canonical stay; padding aliases are not legal input.
    pub fn is_legal_action(&self, state: usize, action: usize) -> bool {
        state < self.n_states() && action <= self.degrees[state]
    }

    /// Action moving from state `from` to neighboring state `to`, or the stay
    /// action when they are equal.
    pub fn action_between(&self, from: usize, to: usize) -> Option<usize> {
        if from == to {
            return Some(self.stay_action(from));
        }
        self.neighbor_states[from].iter().position(|&v| v == to)
    }

    /// Intended successor state of a legal action.
    pub fn successor(&self, state: usize, action: usize) -> usize {
        self.neighbor_states[state].get(action).copied().unwrap_or(state)
    }
}
