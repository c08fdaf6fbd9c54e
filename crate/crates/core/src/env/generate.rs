//! Seeded synthetic street networks.
//!
//! Nodes sit on a jittered square lattice; lattice edges plus one diagonal
//! per cell give a planar triangulation, which is thinned to a random
//! spanning tree plus a random share of the remaining edges. Edge lengths
//! are Euclidean, quantised to 1/64 m so that path sums are exact in binary
//! floating point.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::agent::{demographic_key, GENDERS, INCOME_BANDS};
use super::network::{Building, BuildingKind, Edge, Node, NodeId, StreetNetwork, UnionFind};

pub const LENGTH_QUANTUM: f64 = 1.0 / 64.0;
const SPACING: f64 = 100.0;
const JITTER: f64 = 30.0;
const KEEP_EXTRA_EDGE: f64 = 0.6;

pub fn quantize_length(length: f64) -> f64 {
    ((length / LENGTH_QUANTUM).round() * LENGTH_QUANTUM).max(LENGTH_QUANTUM)
}

/// A connected planar network with `n_nodes ≥ 1` nodes (ids `0..n`) and
/// `min(n_buildings, n_nodes)` buildings on distinct nodes.
pub fn generate_network(n_nodes: usize, n_buildings: usize, seed: u64) -> StreetNetwork {
    assert!(n_nodes >= 1, "need at least one node");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (n_nodes as f64).sqrt().ceil() as usize;
    let positions: Vec<(f64, f64)> = (0..n_nodes)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            (
                c as f64 * SPACING + rng.gen_range(-JITTER..JITTER),
                r as f64 * SPACING + rng.gen_range(-JITTER..JITTER),
            )
        })
        .collect();

    let mut candidates = Vec::new();
    for i in 0..n_nodes {
        let c = i % cols;
        let right = (c + 1 < cols && i + 1 < n_nodes).then_some(i + 1);
        let down = (i + cols < n_nodes).then_some(i + cols);
        if let Some(j) = right {
            candidates.push((i, j));
        }
        if let Some(j) = down {
            candidates.push((i, j));
        }
        if let (Some(rt), Some(dn)) = (right, down) {
            if dn + 1 < n_nodes {
                if rng.gen_bool(0.5) {
                    candidates.push((i, dn + 1));
                } else {
                    candidates.push((rt, dn));
                }
            }
        }
    }

    candidates.shuffle(&mut rng);
    let mut union = UnionFind::new(n_nodes);
    let mut kept = Vec::new();
    let mut extra = Vec::new();
    for (a, b) in candidates {
        if union.join(a, b) {
            kept.push((a, b));
        } else {
            extra.push((a, b));
        }
    }
    for e in extra {
        if rng.gen_bool(KEEP_EXTRA_EDGE) {
            kept.push(e);
        }
    }
    kept.sort_unstable();

    let mut nodes: Vec<Node> = positions
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Node { id: i as NodeId, x, y, building: None })
        .collect();
    let edges = kept
        .into_iter()
        .map(|(a, b)| {
            let (pa, pb) = (positions[a], positions[b]);
            let length = quantize_length(((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt());
            Edge { from: a as NodeId, to: b as NodeId, length }
        })
        .collect();

    let n_buildings = n_buildings.min(n_nodes);
    let mut hosts: Vec<usize> = sample(&mut rng, n_nodes, n_buildings).into_vec();
    hosts.sort_unstable();
    for (id, host) in hosts.into_iter().enumerate() {
        nodes[host].building = Some(random_building(id as u32, &mut rng));
    }
    StreetNetwork::new(nodes, edges).expect("generator builds valid networks")
}

fn random_building<R: Rng>(id: u32, rng: &mut R) -> Building {
    let kind = [BuildingKind::Shop, BuildingKind::Office, BuildingKind::Public][rng.gen_range(0..3)];
    let attractiveness: BTreeMap<String, f64> = INCOME_BANDS
        .iter()
        .flat_map(|&i| GENDERS.iter().map(move |&g| demographic_key(i, g)))
        .map(|key| (key, (rng.gen::<f64>() * 100.0).round() / 100.0))
        .collect();
    Building { id, kind, attractiveness }
}

/// Inserts `count` buildingless pass-through nodes by splitting random edges.
/// New ids continue after the largest existing id.
pub fn subdivide(net: &StreetNetwork, count: usize, seed: u64) -> StreetNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = net.nodes().to_vec();
    let mut edges = net.edges().to_vec();
    let mut next_id = nodes.iter().map(|n| n.id).max().map_or(0, |m| m + 1);
    let mut position: BTreeMap<NodeId, (f64, f64)> = nodes.iter().map(|n| (n.id, (n.x, n.y))).collect();
    for _ in 0..count {
        let k = rng.gen_range(0..edges.len());
        let Edge { from, to, length } = edges.swap_remove(k);
        let fraction = rng.gen_range(0.25..0.75);
        let mut first = quantize_length(length * fraction);
        if first >= length {
            first = length / 2.0;
        }
        let (pa, pb) = (position[&from], position[&to]);
        let (x, y) = (pa.0 + (pb.0 - pa.0) * fraction, pa.1 + (pb.1 - pa.1) * fraction);
        let id = next_id;
        next_id += 1;
        position.insert(id, (x, y));
        nodes.push(Node { id, x, y, building: None });
        edges.push(Edge { from, to: id, length: first });
        edges.push(Edge { from: id, to, length: length - first });
    }
    StreetNetwork::new(nodes, edges).expect("subdivision keeps the network valid")
}
