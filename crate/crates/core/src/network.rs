//! Road network graph, shortest paths and hub segmentation of truck paths.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{Duration, MS_PER_HOUR};

const SE33_JSON: &str = include_str!("../data/se33.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Hub,
    Junction,
}

/// Index of a directed edge inside its [`RoadNetwork`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// Length in whole meters; all path arithmetic is done on this value.
    pub length_m: u64,
}

impl Edge {
    pub fn length_km(&self) -> f64 {
        self.length_m as f64 / 1000.0
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(NodeId, NodeId),
    #[error("edge {0} -> {1} has non-positive length")]
    NonPositiveLength(NodeId, NodeId),
    #[error("no path from {0} to {1}")]
    Unreachable(NodeId, NodeId),
    #[error("origin and destination are both {0}")]
    SameEndpoints(NodeId),
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    kind: NodeKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EdgeRecord {
    from: NodeId,
    to: NodeId,
    length_km: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
}

/// Directed road graph of hubs and junctions. Immutable once built.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "NetworkFile", into = "NetworkFile")]
pub struct RoadNetwork {
    name: Option<String>,
    kinds: BTreeMap<NodeId, NodeKind>,
    edges: Vec<Edge>,
    outgoing: BTreeMap<NodeId, Vec<EdgeId>>,
    incoming: BTreeMap<NodeId, Vec<EdgeId>>,
    by_endpoints: HashMap<(NodeId, NodeId), EdgeId>,
}

impl TryFrom<NetworkFile> for RoadNetwork {
    type Error = NetworkError;

    fn try_from(file: NetworkFile) -> Result<Self, Self::Error> {
        let mut builder = NetworkBuilder::default();
        for n in file.nodes {
            builder = builder.node(n.id, n.kind);
        }
        for e in file.edges {
            builder = builder.edge_km(e.from, e.to, e.length_km);
        }
        let mut net = builder.build()?;
        net.name = file.name;
        Ok(net)
    }
}

impl From<RoadNetwork> for NetworkFile {
    fn from(net: RoadNetwork) -> Self {
        NetworkFile {
            name: net.name.clone(),
            nodes: net
                .kinds
                .iter()
                .map(|(&id, &kind)| NodeRecord { id, kind })
                .collect(),
            edges: net
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    from: e.from,
                    to: e.to,
                    length_km: e.length_km(),
                })
                .collect(),
        }
    }
}

/// Incremental constructor; validation happens in [`NetworkBuilder::build`].
#[derive(Default, Debug, Clone)]
pub struct NetworkBuilder {
    nodes: Vec<(NodeId, NodeKind)>,
    edges: Vec<(NodeId, NodeId, f64)>,
}

impl NetworkBuilder {
    pub fn node(mut self, id: NodeId, kind: NodeKind) -> Self {
        self.nodes.push((id, kind));
        self
    }

    pub fn hub(self, id: u32) -> Self {
        self.node(NodeId(id), NodeKind::Hub)
    }

    pub fn junction(self, id: u32) -> Self {
        self.node(NodeId(id), NodeKind::Junction)
    }

    pub fn edge_km(mut self, from: NodeId, to: NodeId, length_km: f64) -> Self {
        self.edges.push((from, to, length_km));
        self
    }

    pub fn road(self, from: u32, to: u32, length_km: f64) -> Self {
        self.edge_km(NodeId(from), NodeId(to), length_km)
    }

    /// Adds both directions of a road.
    pub fn two_way(self, a: u32, b: u32, length_km: f64) -> Self {
        self.road(a, b, length_km).road(b, a, length_km)
    }

    pub fn build(self) -> Result<RoadNetwork, NetworkError> {
        let mut kinds = BTreeMap::new();
        for (id, kind) in self.nodes {
            if kinds.insert(id, kind).is_some() {
                return Err(NetworkError::DuplicateNode(id));
            }
        }
        let mut net = RoadNetwork {
            name: None,
            outgoing: kinds.keys().map(|&k| (k, Vec::new())).collect(),
            incoming: kinds.keys().map(|&k| (k, Vec::new())).collect(),
            kinds,
            edges: Vec::new(),
            by_endpoints: HashMap::new(),
        };
        for (from, to, km) in self.edges {
            for n in [from, to] {
                if !net.kinds.contains_key(&n) {
                    return Err(NetworkError::UnknownNode(n));
                }
            }
            let length_m = (km * 1000.0).round();
            if !(length_m >= 1.0) {
                return Err(NetworkError::NonPositiveLength(from, to));
            }
            let id = EdgeId(net.edges.len() as u32);
            if net.by_endpoints.insert((from, to), id).is_some() {
                return Err(NetworkError::DuplicateEdge(from, to));
            }
            net.edges.push(Edge {
                from,
                to,
                length_m: length_m as u64,
            });
            net.outgoing.get_mut(&from).unwrap().push(id);
            net.incoming.get_mut(&to).unwrap().push(id);
        }
        Ok(net)
    }
}

impl RoadNetwork {
    /// The bundled synthetic 33-hub network with 52 two-way roads.
    pub fn se33() -> Self {
        serde_json::from_str(SE33_JSON).expect("bundled SE-33 network is valid")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.kinds.contains_key(&node)
    }

    pub fn kind(&self, node: NodeId) -> Option<NodeKind> {
        self.kinds.get(&node).copied()
    }

    pub fn is_hub(&self, node: NodeId) -> bool {
        self.kind(node) == Some(NodeKind::Hub)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.kinds.keys().copied()
    }

    pub fn hubs(&self) -> Vec<NodeId> {
        self.kinds
            .iter()
            .filter(|(_, &k)| k == NodeKind::Hub)
            .map(|(&id, _)| id)
            .collect()
    }

    pub fn hub_count(&self) -> usize {
        self.kinds.values().filter(|&&k| k == NodeKind::Hub).count()
    }

    pub fn node_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id.0 as usize]
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, &Edge)> {
        self.edges
            .iter()
            .enumerate()
            .map(|(i, e)| (EdgeId(i as u32), e))
    }

    pub fn edge_between(&self, from: NodeId, to: NodeId) -> Option<EdgeId> {
        self.by_endpoints.get(&(from, to)).copied()
    }

    pub fn outgoing(&self, node: NodeId) -> &[EdgeId] {
        self.outgoing.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn length_m(&self, edges: &[EdgeId]) -> u64 {
        edges.iter().map(|&e| self.edge(e).length_m).sum()
    }

    /// Minimum-length path; among equal-length paths the one with the
    /// lexicographically smallest node sequence.
    pub fn shortest_path(&self, origin: NodeId, destination: NodeId) -> Result<Path, NetworkError> {
        for n in [origin, destination] {
            if !self.contains(n) {
                return Err(NetworkError::UnknownNode(n));
            }
        }
        if origin == destination {
            return Err(NetworkError::SameEndpoints(origin));
        }

        // Distances to the destination over reversed edges, then a greedy walk
        // from the origin picking the smallest next node on a tight edge.
        let mut dist: HashMap<NodeId, u64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(destination, 0);
        heap.push(Reverse((0u64, destination)));
        while let Some(Reverse((d, v))) = heap.pop() {
            if dist.get(&v).is_some_and(|&best| d > best) {
                continue;
            }
            for &eid in &self.incoming[&v] {
                let e = self.edge(eid);
                let nd = d + e.length_m;
                if dist.get(&e.from).is_none_or(|&cur| nd < cur) {
                    dist.insert(e.from, nd);
                    heap.push(Reverse((nd, e.from)));
                }
            }
        }
        let Some(&total) = dist.get(&origin) else {
            return Err(NetworkError::Unreachable(origin, destination));
        };

        let mut nodes = vec![origin];
        let mut edges = Vec::new();
        let mut here = origin;
        let mut remaining = total;
        while here != destination {
            let next = self
                .outgoing(here)
                .iter()
                .filter_map(|&eid| {
                    let e = self.edge(eid);
                    let rest = dist.get(&e.to)?;
                    (e.length_m + rest == remaining).then_some((e.to, eid))
                })
                .min()
                .expect("a tight edge always exists on a shortest path");
            edges.push(next.1);
            nodes.push(next.0);
            remaining -= self.edge(next.1).length_m;
            here = next.0;
        }
        Ok(Path { nodes, edges })
    }
}

/// A connected sequence of directed edges with no repeated edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Path {
    nodes: Vec<NodeId>,
    edges: Vec<EdgeId>,
}

impl Path {
    /// Builds a path from its node sequence, resolving each hop to an edge.
    pub fn from_nodes(net: &RoadNetwork, nodes: &[NodeId]) -> Result<Self, NetworkError> {
        if nodes.len() < 2 {
            return Err(NetworkError::InvalidPath("fewer than two nodes".into()));
        }
        let mut edges = Vec::with_capacity(nodes.len() - 1);
        let mut seen = HashSet::new();
        for w in nodes.windows(2) {
            let eid = net.edge_between(w[0], w[1]).ok_or_else(|| {
                NetworkError::InvalidPath(format!("no edge {} -> {}", w[0], w[1]))
            })?;
            if !seen.insert(eid) {
                return Err(NetworkError::InvalidPath(format!(
                    "edge {} -> {} repeated",
                    w[0], w[1]
                )));
            }
            edges.push(eid);
        }
        Ok(Path {
            nodes: nodes.to_vec(),
            edges,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn origin(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn length_m(&self, net: &RoadNetwork) -> u64 {
        net.length_m(&self.edges)
    }
}

/// A hub-to-hub (or origin/destination-bounded) stretch of a path whose
/// interior nodes are all junctions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSegment {
    pub start: NodeId,
    pub end: NodeId,
    pub edges: Vec<EdgeId>,
}

impl PathSegment {
    pub fn contains(&self, edge: EdgeId) -> bool {
        self.edges.contains(&edge)
    }

    pub fn shares_edge_with(&self, other: &PathSegment) -> bool {
        self.edges.iter().any(|e| other.edges.contains(e))
    }
}

/// Splits a path at every interior hub.
pub fn segment_path(path: &Path, net: &RoadNetwork) -> Vec<PathSegment> {
    let mut segments = Vec::new();
    let mut start = path.nodes[0];
    let mut edges = Vec::new();
    let last = path.edges.len() - 1;
    for (i, &eid) in path.edges.iter().enumerate() {
        edges.push(eid);
        let head = path.nodes[i + 1];
        if i == last || net.is_hub(head) {
            segments.push(PathSegment {
                start,
                end: head,
                edges: std::mem::take(&mut edges),
            });
            start = head;
        }
    }
    segments
}

/// Time to drive `edges` at a constant `speed_kmh`, rounded to the millisecond.
pub fn travel_time(net: &RoadNetwork, edges: &[EdgeId], speed_kmh: f64) -> Duration {
    assert!(speed_kmh > 0.0, "speed must be positive");
    let meters = net.length_m(edges) as f64;
    Duration((meters / 1000.0 / speed_kmh * MS_PER_HOUR as f64).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    /// Every simple path origin -> destination, by exhaustive DFS.
    fn all_simple_paths(net: &RoadNetwork, o: NodeId, d: NodeId) -> Vec<(u64, Vec<NodeId>)> {
        fn go(
            net: &RoadNetwork,
            at: NodeId,
            d: NodeId,
            stack: &mut Vec<NodeId>,
            len: u64,
            out: &mut Vec<(u64, Vec<NodeId>)>,
        ) {
            if at == d {
                out.push((len, stack.clone()));
                return;
            }
            for &eid in net.outgoing(at) {
                let e = net.edge(eid);
                if stack.contains(&e.to) {
                    continue;
                }
                stack.push(e.to);
                go(net, e.to, d, stack, len + e.length_m, out);
                stack.pop();
            }
        }
        let mut out = Vec::new();
        go(net, o, d, &mut vec![o], 0, &mut out);
        out
    }

    #[test]
    fn two_node_network() {
        let net = NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .road(0, 1, 10.0)
            .build()
            .unwrap();
        let p = net.shortest_path(n(0), n(1)).unwrap();
        assert_eq!(p.nodes(), &[n(0), n(1)]);
        assert_eq!(p.length_m(&net), 10_000);
    }

    #[test]
    fn triangle_prefers_two_short_legs() {
        let net = NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .hub(2)
            .road(0, 1, 5.0)
            .road(1, 2, 5.0)
            .road(0, 2, 11.0)
            .build()
            .unwrap();
        let p = net.shortest_path(n(0), n(2)).unwrap();
        assert_eq!(p.nodes(), &[n(0), n(1), n(2)]);
        assert_eq!(p.length_m(&net), 10_000);
        let oracle = all_simple_paths(&net, n(0), n(2));
        assert_eq!(oracle.iter().map(|p| p.0).min(), Some(10_000));
    }

    #[test]
    fn diamond_tie_goes_to_smaller_node_sequence() {
        // 0 -> 2 -> 3 and 0 -> 1 -> 3 both 10 km; [0,1,3] < [0,2,3].
        let net = NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .hub(2)
            .hub(3)
            .road(0, 2, 4.0)
            .road(2, 3, 6.0)
            .road(0, 1, 6.0)
            .road(1, 3, 4.0)
            .build()
            .unwrap();
        let p = net.shortest_path(n(0), n(3)).unwrap();
        let mut oracle = all_simple_paths(&net, n(0), n(3));
        oracle.sort();
        assert_eq!(oracle[0].0, oracle[1].0);
        assert_eq!(p.nodes(), oracle[0].1.as_slice());
        assert_eq!(p.nodes(), &[n(0), n(1), n(3)]);
    }

    #[test]
    fn shortest_path_errors() {
        let net = NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .road(0, 1, 1.0)
            .build()
            .unwrap();
        assert_eq!(
            net.shortest_path(n(1), n(0)),
            Err(NetworkError::Unreachable(n(1), n(0)))
        );
        assert_eq!(
            net.shortest_path(n(0), n(7)),
            Err(NetworkError::UnknownNode(n(7)))
        );
        assert_eq!(
            net.shortest_path(n(0), n(0)),
            Err(NetworkError::SameEndpoints(n(0)))
        );
    }

    #[test]
    fn builder_rejects_bad_edges() {
        let dup = NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .road(0, 1, 1.0)
            .road(0, 1, 2.0)
            .build();
        assert_eq!(dup.unwrap_err(), NetworkError::DuplicateEdge(n(0), n(1)));
        let zero = NetworkBuilder::default().hub(0).hub(1).road(0, 1, 0.0).build();
        assert_eq!(zero.unwrap_err(), NetworkError::NonPositiveLength(n(0), n(1)));
        let missing = NetworkBuilder::default().hub(0).road(0, 1, 1.0).build();
        assert_eq!(missing.unwrap_err(), NetworkError::UnknownNode(n(1)));
    }

    #[test]
    fn segmentation_splits_at_hubs_only() {
        let net = NetworkBuilder::default()
            .hub(1)
            .junction(2)
            .hub(3)
            .junction(4)
            .hub(5)
            .road(1, 2, 10.0)
            .road(2, 3, 10.0)
            .road(3, 4, 10.0)
            .road(4, 5, 10.0)
            .build()
            .unwrap();
        let one = Path::from_nodes(&net, &[n(1), n(2), n(3)]).unwrap();
        let segs = segment_path(&one, &net);
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start, segs[0].end), (n(1), n(3)));

        let two = Path::from_nodes(&net, &[n(1), n(2), n(3), n(4), n(5)]).unwrap();
        let segs = segment_path(&two, &net);
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].start, segs[0].end), (n(1), n(3)));
        assert_eq!((segs[1].start, segs[1].end), (n(3), n(5)));
        let joined: Vec<EdgeId> = segs.iter().flat_map(|s| s.edges.clone()).collect();
        assert_eq!(joined, two.edges());

        let tail = Path::from_nodes(&net, &[n(3), n(4), n(5)]).unwrap();
        let segs = segment_path(&tail, &net);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].edges, tail.edges());
    }

    #[test]
    fn travel_time_is_length_over_speed() {
        let net = NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .hub(2)
            .road(0, 1, 80.0)
            .road(1, 2, 40.0)
            .build()
            .unwrap();
        let e01 = net.edge_between(n(0), n(1)).unwrap();
        let e12 = net.edge_between(n(1), n(2)).unwrap();
        assert_eq!(travel_time(&net, &[e01], 80.0), Duration::from_hours(1.0));
        assert_eq!(travel_time(&net, &[], 80.0), Duration::ZERO);
        assert_eq!(travel_time(&net, &[e01, e12], 80.0), Duration::from_hours(1.5));
    }

    #[test]
    fn bundled_network_counts() {
        let net = RoadNetwork::se33();
        assert_eq!(net.hub_count(), 33);
        assert_eq!(net.edge_count(), 104);
        for (_, e) in net.edges() {
            assert!(net.edge_between(e.to, e.from).is_some());
        }
        let hubs = net.hubs();
        for &a in &hubs {
            for &b in &hubs {
                if a != b {
                    assert!(net.shortest_path(a, b).is_ok());
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let net = RoadNetwork::se33();
        let back = RoadNetwork::from_json(&net.to_json()).unwrap();
        assert_eq!(back.edge_count(), net.edge_count());
        assert_eq!(back.hubs(), net.hubs());
        assert_eq!(back.name(), Some("SE-33"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_network() -> impl Strategy<Value = RoadNetwork> {
            (2u32..=8).prop_flat_map(|nodes| {
                let pairs: Vec<(u32, u32)> = (0..nodes)
                    .flat_map(|a| (0..nodes).filter(move |&b| b != a).map(move |b| (a, b)))
                    .collect();
                let k = pairs.len();
                (
                    Just(nodes),
                    Just(pairs),
                    prop::collection::vec(prop::option::weighted(0.4, 1u32..20), k),
                )
                    .prop_map(|(nodes, pairs, lens)| {
                        let mut b = NetworkBuilder::default();
                        for i in 0..nodes {
                            b = b.hub(i);
                        }
                        for ((a, c), l) in pairs.into_iter().zip(lens) {
                            if let Some(l) = l {
                                b = b.road(a, c, l as f64);
                            }
                        }
                        b.build().unwrap()
                    })
            })
        }

        proptest! {
            #[test]
            fn shortest_path_matches_enumeration(net in arb_network()) {
                let nodes: Vec<NodeId> = net.nodes().collect();
                for &o in &nodes {
                    for &d in &nodes {
                        if o == d { continue; }
                        let mut oracle = all_simple_paths(&net, o, d);
                        oracle.sort();
                        match net.shortest_path(o, d) {
                            Ok(p) => {
                                prop_assert!(!oracle.is_empty());
                                prop_assert_eq!(p.length_m(&net), oracle[0].0);
                                prop_assert_eq!(p.nodes(), oracle[0].1.as_slice());
                                let segs = segment_path(&p, &net);
                                let joined: Vec<EdgeId> =
                                    segs.iter().flat_map(|s| s.edges.clone()).collect();
                                prop_assert_eq!(joined.as_slice(), p.edges());
                            }
                            Err(NetworkError::Unreachable(..)) => prop_assert!(oracle.is_empty()),
                            Err(e) => prop_assert!(false, "unexpected {e}"),
                        }
                    }
                }
            }
        }
    }
}
