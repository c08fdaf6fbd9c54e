use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u32;

/// Relative slack when deciding whether an edge lies on a shortest path.
const TIGHT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuildingKind {
    Shop,
    Office,
    Public,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Building {
    pub id: u32,
    pub kind: BuildingKind,
    /// Attractiveness per demographic key, each in `[0, 1]`.
    pub attractiveness: BTreeMap<String, f64>,
}

impl Building {
    pub fn attractiveness_for(&self, demographic: &str) -> f64 {
        self.attractiveness.get(demographic).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
    pub building: Option<Building>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkViolation {
    #[error("network has no nodes")]
    Empty,
    #[error("node id {0} appears more than once")]
    DuplicateNodeId(NodeId),
    #[error("node {0} has non-finite coordinates")]
    NonFiniteCoordinate(NodeId),
    #[error("edge {from}-{to} references a missing node")]
    DanglingEdge { from: NodeId, to: NodeId },
    #[error("self-edge at node {0}")]
    SelfEdge(NodeId),
    #[error("duplicate edge {a}-{b}")]
    DuplicateEdge { a: NodeId, b: NodeId },
    #[error("edge {from}-{to} has invalid length {length}")]
    InvalidLength { from: NodeId, to: NodeId, length: f64 },
    #[error("building id {0} appears more than once")]
    DuplicateBuildingId(u32),
    #[error("attractiveness {value} for '{key}' at node {node} outside [0, 1]")]
    AttractivenessOutOfRange { node: NodeId, key: String, value: f64 },
    #[error("network has {components} connected components")]
    Disconnected { components: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid network: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
pub struct NetworkError(pub Vec<NetworkViolation>);

/// Checks structural invariants, returning every violation found.
pub fn validate_network(nodes: &[Node], edges: &[Edge]) -> Result<(), Vec<NetworkViolation>> {
    let mut violations = Vec::new();
    if nodes.is_empty() {
        violations.push(NetworkViolation::Empty);
    }
    let mut ids = BTreeMap::new();
    let mut building_ids = BTreeSet::new();
    for (i, node) in nodes.iter().enumerate() {
        if ids.insert(node.id, i).is_some() {
            violations.push(NetworkViolation::DuplicateNodeId(node.id));
        }
        if !(node.x.is_finite() && node.y.is_finite()) {
            violations.push(NetworkViolation::NonFiniteCoordinate(node.id));
        }
        if let Some(b) = &node.building {
            if !building_ids.insert(b.id) {
                violations.push(NetworkViolation::DuplicateBuildingId(b.id));
            }
            for (key, &value) in &b.attractiveness {
                if !(0.0..=1.0).contains(&value) {
                    violations.push(NetworkViolation::AttractivenessOutOfRange {
                        node: node.id,
                        key: key.clone(),
                        value,
                    });
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    let mut union = UnionFind::new(nodes.len());
    for e in edges {
        let (Some(&a), Some(&b)) = (ids.get(&e.from), ids.get(&e.to)) else {
            violations.push(NetworkViolation::DanglingEdge { from: e.from, to: e.to });
            continue;
        };
        if a == b {
            violations.push(NetworkViolation::SelfEdge(e.from));
            continue;
        }
        if !(e.length.is_finite() && e.length > 0.0) {
            violations.push(NetworkViolation::InvalidLength { from: e.from, to: e.to, length: e.length });
        }
        let key = (e.from.min(e.to), e.from.max(e.to));
        if !seen.insert(key) {
            violations.push(NetworkViolation::DuplicateEdge { a: key.0, b: key.1 });
        }
        union.join(a, b);
    }
    let components = union.components();
    if components > 1 {
        violations.push(NetworkViolation::Disconnected { components });
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub(crate) fn join(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }

    fn components(&mut self) -> usize {
        (0..self.parent.len()).filter(|&x| self.find(x) == x).count()
    }
}

/// A validated, connected, undirected street graph.
///
/// Nodes are kept sorted by id, so a node's index is its rank by id and
/// adjacency lists sorted by index are sorted by neighbor id.
#[derive(Debug, Clone, PartialEq)]
pub struct StreetNetwork {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<NodeId, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl StreetNetwork {
    pub fn new(mut nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, NetworkError> {
        validate_network(&nodes, &edges).map_err(NetworkError)?;
        nodes.sort_by_key(|n| n.id);
        let index: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            let (a, b) = (index[&e.from], index[&e.to]);
            adjacency[a].push((b, e.length));
            adjacency[b].push((a, e.length));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
        }
        Ok(Self { nodes, edges, index, adjacency })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn id_of(&self, index: usize) -> NodeId {
        self.nodes[index].id
    }

    /// `(neighbor index, edge length)` sorted by neighbor id.
    pub fn neighbors(&self, index: usize) -> &[(usize, f64)] {
        &self.adjacency[index]
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a].iter().find(|&&(v, _)| v == b).map(|&(_, l)| l)
    }

    /// Indices of nodes hosting a building, ascending.
    pub fn building_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].building.is_some())
    }

    /// Single-source shortest-path distances over edge lengths.
    pub fn distances_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Frontier { dist: 0.0, node: source });
        while let Some(Frontier { dist: d, node }) = heap.pop() {
            if d > dist[node] {
                continue;
            }
            for &(v, len) in &self.adjacency[node] {
                let nd = d + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Frontier { dist: nd, node: v });
                }
            }
        }
        dist
    }

    /// Next node on the lexicographically smallest shortest path from
    /// `from` toward the target whose distances are `to_target`.
    fn next_hop_with(&self, from: usize, to_target: &[f64]) -> Option<usize> {
        let here = to_target[from];
        if here == 0.0 || !here.is_finite() {
            return None;
        }
        self.adjacency[from]
            .iter()
            .find(|&&(v, len)| (len + to_target[v] - here).abs() <= TIGHT_EPS * here.max(1.0))
            .map(|&(v, _)| v)
    }

    /// Shortest path as node indices, both endpoints included. Among equally
    /// short paths the lexicographically smallest id sequence is returned.
    pub fn shortest_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let to_target = self.distances_from(to);
        if !to_target[from].is_finite() {
            return None;
        }
        let mut path = vec![from];
        let mut current = from;
        while current != to {
            current = self.next_hop_with(current, &to_target)?;
            path.push(current);
        }
        Some(path)
    }

    /// Nodes within `range` hops of `origin` (excluding it), as `(index, hops)`
    /// sorted by index.
    pub fn within_hops(&self, origin: usize, range: usize) -> Vec<(usize, usize)> {
        let mut hops = HashMap::new();
        hops.insert(origin, 0);
        let mut queue = VecDeque::from([origin]);
        while let Some(u) = queue.pop_front() {
            let h = hops[&u];
            if h == range {
                continue;
            }
            for &(v, _) in &self.adjacency[u] {
                if let std::collections::hash_map::Entry::Vacant(e) = hops.entry(v) {
                    e.insert(h + 1);
                    queue.push_back(v);
                }
            }
        }
        let mut out: Vec<(usize, usize)> = hops.into_iter().filter(|&(v, _)| v != origin).collect();
        out.sort_unstable();
        out
    }

    /// Node index closest to `(x, y)`; ties go to the lowest id.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.x - x).powi(2) + (n.y - y).powi(2);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Next-hop tables toward a fixed set of targets.
#[derive(Debug, Clone, Default)]
pub struct Router {
    tables: HashMap<usize, Vec<Option<usize>>>,
}

impl Router {
    pub fn new(net: &StreetNetwork, targets: impl IntoIterator<Item = usize>) -> Self {
        let mut tables = HashMap::new();
        for t in targets {
            tables.entry(t).or_insert_with(|| {
                let dist = net.distances_from(t);
                (0..net.len()).map(|u| net.next_hop_with(u, &dist)).collect()
            });
        }
        Self { tables }
    }

    /// Next node index from `from` toward `to`, or `None` when already there
    /// or unreachable. Targets not prepared up front are routed on demand.
    pub fn next_hop(&self, net: &StreetNetwork, from: usize, to: usize) -> Option<usize> {
        match self.tables.get(&to) {
            Some(table) => table[from],
            None => net.next_hop_with(from, &net.distances_from(to)),
        }
    }
}
