//! Street-network world model: graph, pedestrian rules, MDP view, and
//! state-space reduction.

pub mod agent;
pub mod compile;
pub mod generate;
pub mod network;
pub mod reduce;

pub use agent::{
    activity_match, consume_arrivals, demographic_key, deviation_probability, streets_policy_step, ActivityKind, AgentProfile,
    AgentState, Decision, Gender, IncomeBand, Navigator, PolicyStep, ProfileError, StreetsError,
};
pub use compile::{compile_mdp, ActionTarget, CompileError, MdpCompilation};
pub use generate::{generate_network, subdivide};
pub use network::{
    validate_network, Building, BuildingKind, Edge, NetworkError, NetworkViolation, Node, NodeId, Router,
    StreetNetwork,
};
pub use reduce::{reduce_network, ContractedPosition, NodeMapping};
