//! Contraction of pass-through street nodes.
//!
//! A node is contracted when it has degree two, hosts no building, and its
//! two neighbors are distinct and not already adjacent; its two edges merge
//! into one whose length is their sum. Contraction repeats until no node
//! qualifies, highest ids first, so the result is a fixpoint and reducing it
//! again is a no-op.
//! Shortest-path distances between retained nodes are unchanged.

use std::collections::BTreeMap;

use serde::Serialize;

use super::network::{Edge, Node, NodeId, StreetNetwork};

/// Where a removed node ended up: inside the retained edge `from`–`to`, at
/// distance `offset` from `from`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractedPosition {
    pub from: NodeId,
    pub to: NodeId,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NodeMapping {
    pub removed: BTreeMap<NodeId, ContractedPosition>,
}

#[derive(Debug, Clone)]
struct Link {
    length: f64,
    // removed nodes strictly between the endpoints, ordered from the smaller id
    interior: Vec<(NodeId, f64)>,
}

fn key(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
    (a.min(b), a.max(b))
}

/// Contracts every eligible pass-through node. See the module docs.
pub fn reduce_network(net: &StreetNetwork) -> (StreetNetwork, NodeMapping) {
    let mut links: BTreeMap<(NodeId, NodeId), Link> = net
        .edges()
        .iter()
        .map(|e| (key(e.from, e.to), Link { length: e.length, interior: Vec::new() }))
        .collect();
    let mut adjacency: BTreeMap<NodeId, Vec<NodeId>> = net.nodes().iter().map(|n| (n.id, Vec::new())).collect();
    for &(a, b) in links.keys() {
        adjacency.get_mut(&a).expect("validated").push(b);
        adjacency.get_mut(&b).expect("validated").push(a);
    }
    let has_building: BTreeMap<NodeId, bool> = net.nodes().iter().map(|n| (n.id, n.building.is_some())).collect();

    let mut contracted = false;
    loop {
        let mut changed = false;
        let candidates: Vec<NodeId> = adjacency.keys().rev().copied().collect();
        for v in candidates {
            if has_building[&v] {
                continue;
            }
            let [u, w] = adjacency[&v][..] else { continue };
            if u == w || links.contains_key(&key(u, w)) {
                continue;
            }
            let left = links.remove(&key(u, v)).expect("edge");
            let right = links.remove(&key(v, w)).expect("edge");
            // walk u -> v -> w, then store oriented from the smaller endpoint
            let left_seq = oriented(left.interior, u < v, left.length);
            let right_seq = oriented(right.interior, v < w, right.length);
            let mut seq = left_seq;
            seq.push((v, left.length));
            seq.extend(right_seq.into_iter().map(|(id, d)| (id, left.length + d)));
            let length = left.length + right.length;
            let interior = if u < w { seq } else { seq.into_iter().rev().map(|(id, d)| (id, length - d)).collect() };
            links.insert(key(u, w), Link { length, interior });

            adjacency.remove(&v);
            for (end, old, new) in [(u, v, w), (w, v, u)] {
                let list = adjacency.get_mut(&end).expect("neighbor");
                let slot = list.iter().position(|&x| x == old).expect("adjacent");
                list[slot] = new;
            }
            changed = true;
            contracted = true;
        }
        if !changed {
            break;
        }
    }

    if !contracted {
        return (net.clone(), NodeMapping::default());
    }
    let nodes: Vec<Node> = net.nodes().iter().filter(|n| adjacency.contains_key(&n.id)).cloned().collect();
    let mut mapping = NodeMapping::default();
    let edges: Vec<Edge> = links
        .into_iter()
        .map(|((a, b), link)| {
            for (id, offset) in link.interior {
                mapping.removed.insert(id, ContractedPosition { from: a, to: b, offset });
            }
            Edge { from: a, to: b, length: link.length }
        })
        .collect();
    let reduced = StreetNetwork::new(nodes, edges).expect("contraction preserves validity");
    (reduced, mapping)
}

/// Interior points of a link read in the direction of travel. `low_first`
/// says whether travel starts at the link's smaller endpoint.
fn oriented(interior: Vec<(NodeId, f64)>, low_first: bool, length: f64) -> Vec<(NodeId, f64)> {
    if low_first {
        interior
    } else {
        interior.into_iter().rev().map(|(id, d)| (id, length - d)).collect()
    }
}
