//! A small fixed scenario: eight street corners in two rows, a shop at
//! node 7, an office at node 5, the exit at node 0.
//!
//! ```text
//! 0 - 1 - 2 - 3
//! |       |   |
//! 4 - 5 - 6 - 7
//! ```

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::env::agent::{GENDERS, INCOME_BANDS};
use crate::env::{
    demographic_key, ActivityKind, Building, BuildingKind, Edge, Gender, IncomeBand, Node, NodeId, StreetNetwork,
};
use crate::sim::{ProfileGroup, ProfileTemplate, Scenario, DEFAULT_DISCOUNT, DEFAULT_SLIP};

pub const SHOP_NODE: NodeId = 7;
pub const OFFICE_NODE: NodeId = 5;
pub const EXIT_NODE: NodeId = 0;

fn building(id: u32, kind: BuildingKind, attractiveness: f64) -> Building {
    let table: BTreeMap<String, f64> = INCOME_BANDS
        .iter()
        .flat_map(|&i| GENDERS.iter().map(move |&g| (demographic_key(i, g), attractiveness)))
        .collect();
    Building { id, kind, attractiveness: table }
}

pub fn toy_network() -> StreetNetwork {
    let nodes = (0..8u32)
        .map(|i| Node {
            id: i,
            x: f64::from(i % 4) * 100.0,
            y: f64::from(i / 4) * 100.0,
            building: match i {
                SHOP_NODE => Some(building(0, BuildingKind::Shop, 0.9)),
                OFFICE_NODE => Some(building(1, BuildingKind::Office, 0.5)),
                _ => None,
            },
        })
        .collect();
    let edges = [(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6), (6, 7), (2, 6), (3, 7)]
        .into_iter()
        .map(|(from, to)| Edge { from, to, length: 100.0 })
        .collect();
    StreetNetwork::new(nodes, edges).expect("toy network is valid")
}

/// Two office workers and one human slot.
pub fn toy_scenario(seed: u64) -> Scenario {
    Scenario {
        network: Arc::new(toy_network()),
        network_path: "network.json".into(),
        profiles: vec![ProfileGroup {
            profile: ProfileTemplate {
                income_band: IncomeBand::Mid,
                gender: Gender::Female,
                activity: ActivityKind::Working,
                speed: 1,
                visual_range: 1,
                fixation: 0.5,
                total_time: 60,
                schedule: Some(vec![OFFICE_NODE]),
                schedule_length: 1,
            },
            count: 2,
        }],
        human_slots: 1,
        exit_node: EXIT_NODE,
        ticks: 200,
        seed,
        slip_probability: DEFAULT_SLIP,
        discount: DEFAULT_DISCOUNT,
    }
}
