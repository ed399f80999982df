//! Pairwise feasibility graph, feasible-platoon enumeration and batch selection.
//!
//! Two announced trucks are adjacent when their next path segments share an
//! edge and their departure windows `[arrival, latest_departure]` intersect.
//! A feasible platoon is a clique whose windows have a common point.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NodeId, PathSegment};
use crate::scenario::{FleetId, TruckId};
use crate::units::{Money, Time};

/// Largest batch the bitmask-based enumeration and solver handle.
pub const MAX_BATCH_VERTICES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeasibilityError {
    #[error("announcements belong to different hubs ({0} and {1})")]
    MixedHub(NodeId, NodeId),
    #[error("more than {cap} feasible platoons")]
    CapExceeded { cap: usize },
    #[error("graph has {0} vertices, at most {MAX_BATCH_VERTICES} supported")]
    TooManyVertices(usize),
}

/// Travel information a truck shares with the next hub on its path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Announcement {
    pub truck: TruckId,
    pub fleet: FleetId,
    pub hub: NodeId,
    pub arrival: Time,
    pub latest_departure: Time,
    pub next_segment: PathSegment,
}

impl Announcement {
    pub fn window_overlaps(&self, other: &Announcement) -> bool {
        self.arrival.max(other.arrival) <= self.latest_departure.min(other.latest_departure)
    }

    pub fn compatible_with(&self, other: &Announcement) -> bool {
        self.next_segment.shares_edge_with(&other.next_segment) && self.window_overlaps(other)
    }
}

#[derive(Clone, Debug)]
pub struct FeasibilityGraph {
    vertices: Vec<Announcement>,
    adjacency: Vec<Vec<bool>>,
}

#[derive(Serialize)]
struct GraphDump<'a> {
    vertices: &'a [Announcement],
    adjacency: Vec<Vec<usize>>,
}

impl FeasibilityGraph {
    pub fn vertices(&self) -> &[Announcement] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.len()).filter(|&u| self.adjacency[v][u]).collect()
    }

    pub fn edge_count(&self) -> usize {
        (0..self.len()).map(|v| self.neighbors(v).len()).sum::<usize>() / 2
    }

    /// Adjacency-list dump used for debugging and fixtures.
    pub fn to_json(&self) -> String {
        let dump = GraphDump {
            vertices: &self.vertices,
            adjacency: (0..self.len()).map(|v| self.neighbors(v)).collect(),
        };
        serde_json::to_string_pretty(&dump).expect("graph serializes")
    }

    fn neighbor_mask(&self, v: usize) -> u64 {
        self.adjacency[v]
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .fold(0u64, |m, (u, _)| m | (1 << u))
    }
}

pub fn build_graph(anns: Vec<Announcement>) -> Result<FeasibilityGraph, FeasibilityError> {
    if let Some(first) = anns.first() {
        if let Some(other) = anns.iter().find(|a| a.hub != first.hub) {
            return Err(FeasibilityError::MixedHub(first.hub, other.hub));
        }
    }
    let n = anns.len();
    let mut adjacency = vec![vec![false; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let ok = anns[i].compatible_with(&anns[j]);
            adjacency[i][j] = ok;
            adjacency[j][i] = ok;
        }
    }
    Ok(FeasibilityGraph {
        vertices: anns,
        adjacency,
    })
}

/// A feasible platoon. `members` holds vertex indices into the owning batch,
/// sorted by truck id; profits are zero until priced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePlatoon {
    pub members: Vec<usize>,
    pub trucks: Vec<TruckId>,
    pub departure: Time,
    pub per_fleet_profit: BTreeMap<FleetId, Money>,
    pub total_profit: Money,
}

impl CandidatePlatoon {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn is_singleton(&self) -> bool {
        self.members.len() == 1
    }

    pub fn mask(&self) -> u64 {
        self.members.iter().fold(0, |m, &v| m | (1u64 << v))
    }

    pub fn fleet_profit(&self, fleet: FleetId) -> Money {
        self.per_fleet_profit.get(&fleet).copied().unwrap_or_default()
    }
}

/// Every clique of `g` whose windows share a common point, singletons
/// included, ordered by size and then by member truck ids. Fails with
/// `CapExceeded` as soon as more than `cap` platoons are found.
pub fn enumerate_platoons(
    g: &FeasibilityGraph,
    cap: usize,
) -> Result<Vec<CandidatePlatoon>, FeasibilityError> {
    let n = g.len();
    if n > MAX_BATCH_VERTICES {
        return Err(FeasibilityError::TooManyVertices(n));
    }
    let neighbors: Vec<u64> = (0..n).map(|v| g.neighbor_mask(v)).collect();
    let mut found: Vec<u64> = Vec::new();

    struct Search<'a> {
        g: &'a FeasibilityGraph,
        neighbors: &'a [u64],
        cap: usize,
        found: &'a mut Vec<u64>,
    }

    impl Search<'_> {
        // Each clique is produced once, by adding vertices in increasing index order.
        fn expand(
            &mut self,
            clique: u64,
            candidates: u64,
            max_arrival: Time,
            min_latest: Time,
        ) -> Result<(), FeasibilityError> {
            let mut rest = candidates;
            while rest != 0 {
                let v = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let a = &self.g.vertices[v];
                let arr = max_arrival.max(a.arrival);
                let lat = min_latest.min(a.latest_departure);
                if arr > lat {
                    // adding more members only narrows the window
                    continue;
                }
                let grown = clique | (1 << v);
                self.found.push(grown);
                if self.found.len() > self.cap {
                    return Err(FeasibilityError::CapExceeded { cap: self.cap });
                }
                let higher = if v == 63 { 0 } else { !0u64 << (v + 1) };
                self.expand(grown, candidates & self.neighbors[v] & higher, arr, lat)?;
            }
            Ok(())
        }
    }

    let all = if n == 64 { !0 } else { (1u64 << n) - 1 };
    Search {
        g,
        neighbors: &neighbors,
        cap,
        found: &mut found,
    }
    .expand(0, all, Time(i64::MIN), Time(i64::MAX))?;

    let mut platoons: Vec<CandidatePlatoon> = found
        .into_iter()
        .map(|mask| {
            let mut members: Vec<usize> = (0..n).filter(|&v| mask & (1 << v) != 0).collect();
            members.sort_by_key(|&v| g.vertices[v].truck);
            let trucks = members.iter().map(|&v| g.vertices[v].truck).collect();
            let departure = members
                .iter()
                .map(|&v| g.vertices[v].arrival)
                .max()
                .unwrap();
            CandidatePlatoon {
                members,
                trucks,
                departure,
                per_fleet_profit: BTreeMap::new(),
                total_profit: Money::ZERO,
            }
        })
        .collect();
    platoons.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.trucks.cmp(&b.trucks)));
    Ok(platoons)
}

/// The trucks and feasible platoons considered by one coordination instance.
#[derive(Clone, Debug)]
pub struct Batch {
    pub hub: NodeId,
    pub announcements: Vec<Announcement>,
    pub candidates: Vec<CandidatePlatoon>,
    pub fleets: Vec<FleetId>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.announcements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.announcements.is_empty()
    }

    pub fn trucks(&self) -> Vec<TruckId> {
        self.announcements.iter().map(|a| a.truck).collect()
    }

    pub fn fleet_of(&self, vertex: usize) -> FleetId {
        self.announcements[vertex].fleet
    }

    /// Indices of candidates made up only of trucks from `fleet`.
    pub fn pure_fleet_candidates(&self, fleet: FleetId) -> Vec<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.members.iter().all(|&v| self.fleet_of(v) == fleet))
            .map(|(i, _)| i)
            .collect()
    }

    /// Vertex indices of the batch trucks from `fleet`.
    pub fn fleet_members(&self, fleet: FleetId) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.fleet_of(v) == fleet).collect()
    }

    /// Moves every platoon departure to no earlier than `now`; platoons made
    /// only of trucks already waiting at the hub cannot leave in the past.
    pub fn with_departures_not_before(mut self, now: Time) -> Self {
        for c in &mut self.candidates {
            c.departure = c.departure.max(now);
        }
        self
    }
}

/// Sorts `uncoordinated` by arrival (ties by truck id) and keeps the longest
/// prefix with at most `max_trucks` trucks and at most `max_platoons`
/// feasible platoons. The first truck is always kept.
pub fn select_batch(
    mut uncoordinated: Vec<Announcement>,
    max_trucks: usize,
    max_platoons: usize,
) -> Result<Batch, FeasibilityError> {
    assert!(!uncoordinated.is_empty(), "batch selection needs at least one truck");
    uncoordinated.sort_by_key(|a| (a.arrival, a.truck));
    let limit = uncoordinated
        .len()
        .min(max_trucks.max(1))
        .min(MAX_BATCH_VERTICES);

    let mut best: Option<(FeasibilityGraph, Vec<CandidatePlatoon>)> = None;
    for k in 1..=limit {
        let g = build_graph(uncoordinated[..k].to_vec())?;
        // the one-truck prefix is kept even if the platoon cap is below one
        let cap = if k == 1 { max_platoons.max(1) } else { max_platoons };
        match enumerate_platoons(&g, cap) {
            Ok(c) => best = Some((g, c)),
            Err(FeasibilityError::CapExceeded { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    let (g, candidates) = best.expect("a single truck always forms a batch");
    let mut fleets: Vec<FleetId> = g.vertices.iter().map(|a| a.fleet).collect();
    fleets.sort();
    fleets.dedup();
    Ok(Batch {
        hub: g.vertices[0].hub,
        announcements: g.vertices,
        candidates,
        fleets,
    })
}
