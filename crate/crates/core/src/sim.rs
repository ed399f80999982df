//! Event-driven simulation of trucks announcing to hubs, coordination
//! instances being triggered, and platoons departing.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feasibility::{select_batch, Announcement, Batch, FeasibilityError};
use crate::network::{travel_time, EdgeId, NodeId};
use crate::profit::{candidate_members, edge_memberships, price_candidates};
use crate::scenario::{EconomicParams, FleetId, Scenario, TruckId};
use crate::strategies::{
    solve_pareto_with_hint, solve_single_fleet_all, solve_system_max, ParetoProgram, StrategyError,
    StrategyKind, StrategySolution,
};
use crate::units::{Duration, Money, Time};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("{0} changed state between batch construction and assignment")]
    StaleSolution(TruckId),
    #[error("event queue drained with {0} trucks unfinished")]
    Stuck(usize),
}

/// What happens to the truck that triggered an instance when it is assigned
/// to travel alone.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingletonRule {
    /// It stays uncoordinated and may join a later batch; it leaves alone
    /// once its latest departure time is reached.
    #[default]
    WaitForLaterBatches,
    /// It leaves alone as soon as it has arrived.
    DepartAtArrival,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub strategy: StrategyKind,
    /// Solve all three programs at every instance and record them, so the
    /// per-instance ordering can be checked. Only `strategy` is applied.
    pub audit: bool,
    pub singleton_rule: SingletonRule,
    /// Keep every solver instance in the result.
    pub dump_instances: bool,
}

impl SimConfig {
    pub fn new(strategy: StrategyKind) -> Self {
        SimConfig {
            strategy,
            audit: false,
            singleton_rule: SingletonRule::default(),
            dump_instances: false,
        }
    }

    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    HubArrival,
    DestinationArrival,
    TriggerCheck,
    PlatoonDeparture,
    OriginDeparture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub time: Time,
    pub kind: EventKind,
    /// Truck id, or hub id for trigger checks.
    pub subject: u32,
    /// Truck concerned by the event.
    pub truck: TruckId,
    /// Segment index the event was scheduled for; events from an earlier
    /// leg are stale and ignored.
    pub leg: usize,
    seq: u64,
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.kind, self.subject, self.seq).cmp(&(
            other.time,
            other.kind,
            other.subject,
            other.seq,
        ))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AtOrigin,
    EnRoute,
    WaitingUncoordinated,
    WaitingCoordinated,
    Done,
}

#[derive(Clone, Debug)]
pub struct TruckState {
    pub phase: Phase,
    /// Index of the segment being driven, or of the segment just finished
    /// while at a hub.
    pub segment: usize,
    pub coordinated_departure: Option<Time>,
    pub budget_remaining: Duration,
    announcement: Option<Announcement>,
    platoon: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubVisit {
    pub hub: NodeId,
    pub arrival: Time,
    pub departure: Time,
    pub wait: Duration,
    pub coordinated: bool,
    /// Index into [`SimulationResult::platoons`].
    pub platoon: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub truck: TruckId,
    pub fleet: FleetId,
    pub start_time: Time,
    pub waiting_budget: Duration,
    pub path_m: u64,
    pub visits: Vec<HubVisit>,
    pub destination_arrival: Option<Time>,
    pub total_wait: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeUse {
    pub edge: EdgeId,
    pub length_m: u64,
    pub members: usize,
    pub per_fleet: BTreeMap<FleetId, usize>,
}

/// A multi-truck platoon that left a hub.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizedPlatoon {
    pub instance: usize,
    pub hub: NodeId,
    pub departure: Time,
    pub trucks: Vec<TruckId>,
    pub edges: Vec<EdgeUse>,
    pub per_fleet_profit: BTreeMap<FleetId, Money>,
    pub total_profit: Money,
}

impl RealizedPlatoon {
    pub fn follower_m(&self) -> u64 {
        self.edges
            .iter()
            .map(|e| e.members.saturating_sub(1) as u64 * e.length_m)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub truck: TruckId,
    pub fleet: FleetId,
    pub arrival: Time,
    pub latest_departure: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatoonRecord {
    pub trucks: Vec<TruckId>,
    pub departure: Time,
    pub per_fleet_profit: BTreeMap<FleetId, Money>,
    pub total_profit: Money,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub strategy: StrategyKind,
    pub platoons: Vec<PlatoonRecord>,
    pub per_fleet_profit: BTreeMap<FleetId, Money>,
    pub total_profit: Money,
    pub solve_time_s: f64,
}

impl SolutionRecord {
    fn new(batch: &Batch, s: &StrategySolution) -> Self {
        SolutionRecord {
            strategy: s.strategy,
            platoons: s
                .selected
                .iter()
                .map(|&p| {
                    let c = &batch.candidates[p];
                    PlatoonRecord {
                        trucks: c.trucks.clone(),
                        departure: c.departure,
                        per_fleet_profit: c.per_fleet_profit.clone(),
                        total_profit: c.total_profit,
                    }
                })
                .collect(),
            per_fleet_profit: s.per_fleet_profit.clone(),
            total_profit: s.total_profit,
            solve_time_s: s.solve_time_s,
        }
    }

    pub fn fleet_profit(&self, fleet: FleetId) -> Money {
        self.per_fleet_profit.get(&fleet).copied().unwrap_or_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub variables: usize,
    pub constraints: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub single_fleet: SolutionRecord,
    pub pareto: SolutionRecord,
    pub system_max: SolutionRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: usize,
    pub hub: NodeId,
    pub time: Time,
    pub trigger: TruckId,
    pub batch: Vec<BatchEntry>,
    pub fleets: Vec<FleetId>,
    pub candidate_count: usize,
    /// Size of the cross-fleet program, when one was built.
    pub census: Option<Census>,
    pub applied: SolutionRecord,
    /// Single-fleet profit of each fleet, when it was computed.
    pub baseline: Option<BTreeMap<FleetId, Money>>,
    pub audit: Option<AuditRecord>,
    /// Wall-clock seconds of the solves needed by the applied strategy.
    pub solve_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HubLog {
    pub hub: NodeId,
    pub instances: Vec<InstanceRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDump {
    pub instance: usize,
    pub hub: NodeId,
    pub time: Time,
    pub batch: Vec<BatchEntry>,
    pub candidates: Vec<PlatoonRecord>,
    pub floors: Option<BTreeMap<FleetId, Money>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub singleton_rule: SingletonRule,
    pub params: EconomicParams,
    pub fleets: Vec<FleetId>,
    pub itineraries: Vec<Itinerary>,
    pub hub_logs: Vec<HubLog>,
    pub platoons: Vec<RealizedPlatoon>,
    pub fleet_profit: BTreeMap<FleetId, Money>,
    pub total_profit: Money,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub instance_dumps: Vec<InstanceDump>,
}

impl SimulationResult {
    pub fn instances(&self) -> impl Iterator<Item = &InstanceRecord> {
        self.hub_logs.iter().flat_map(|h| h.instances.iter())
    }

    pub fn instance_count(&self) -> usize {
        self.hub_logs.iter().map(|h| h.instances.len()).sum()
    }

    /// A copy with every wall-clock measurement zeroed, for comparing runs.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for log in &mut r.hub_logs {
            for inst in &mut log.instances {
                inst.solve_time_s = 0.0;
                inst.applied.solve_time_s = 0.0;
                if let Some(a) = &mut inst.audit {
                    a.single_fleet.solve_time_s = 0.0;
                    a.pareto.solve_time_s = 0.0;
                    a.system_max.solve_time_s = 0.0;
                }
            }
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn fleet_profit(&self, fleet: FleetId) -> Money {
        self.fleet_profit.get(&fleet).copied().unwrap_or_default()
    }
}

struct Simulator<'a> {
    scenario: &'a Scenario,
    config: SimConfig,
    params: &'a EconomicParams,
    queue: BinaryHeap<Reverse<Event>>,
    seq: u64,
    trucks: Vec<TruckState>,
    index: BTreeMap<TruckId, usize>,
    itineraries: Vec<Itinerary>,
    /// Announced trucks that are not yet coordinated, per hub.
    pending: BTreeMap<NodeId, BTreeSet<TruckId>>,
    last_instance: BTreeMap<NodeId, Time>,
    logs: BTreeMap<NodeId, Vec<InstanceRecord>>,
    platoons: Vec<RealizedPlatoon>,
    dumps: Vec<InstanceDump>,
    instance_count: usize,
}

/// Runs `scenario` to completion under `config`.
pub fn run(scenario: &Scenario, config: SimConfig) -> Result<SimulationResult, SimError> {
    let mut sim = Simulator::new(scenario, config);
    while let Some(Reverse(ev)) = sim.queue.pop() {
        sim.handle(ev)?;
    }
    sim.finish()
}

impl<'a> Simulator<'a> {
    fn new(scenario: &'a Scenario, config: SimConfig) -> Self {
        let net = &scenario.network;
        let mut sim = Simulator {
            scenario,
            config,
            params: &scenario.params,
            queue: BinaryHeap::new(),
            seq: 0,
            trucks: Vec::new(),
            index: BTreeMap::new(),
            itineraries: Vec::new(),
            pending: BTreeMap::new(),
            last_instance: BTreeMap::new(),
            logs: BTreeMap::new(),
            platoons: Vec::new(),
            dumps: Vec::new(),
            instance_count: 0,
        };
        for (i, t) in scenario.trucks.iter().enumerate() {
            sim.index.insert(t.id, i);
            sim.trucks.push(TruckState {
                phase: Phase::AtOrigin,
                segment: 0,
                coordinated_departure: None,
                budget_remaining: t.waiting_budget,
                announcement: None,
                platoon: None,
            });
            sim.itineraries.push(Itinerary {
                truck: t.id,
                fleet: t.fleet,
                start_time: t.start_time,
                waiting_budget: t.waiting_budget,
                path_m: t.path.length_m(net),
                visits: Vec::new(),
                destination_arrival: None,
                total_wait: Duration::ZERO,
            });
            sim.push(t.start_time, EventKind::OriginDeparture, t.id.0, t.id, 0);
        }
        sim
    }

    fn push(&mut self, time: Time, kind: EventKind, subject: u32, truck: TruckId, leg: usize) {
        self.seq += 1;
        self.queue.push(Reverse(Event {
            time,
            kind,
            subject,
            truck,
            leg,
            seq: self.seq,
        }));
    }

    fn handle(&mut self, ev: Event) -> Result<(), SimError> {
        let i = self.index[&ev.truck];
        if self.trucks[i].segment != ev.leg && ev.kind != EventKind::OriginDeparture {
            return Ok(());
        }
        match ev.kind {
            EventKind::OriginDeparture => {
                self.depart(i, ev.time, None);
            }
            EventKind::HubArrival => {
                let s = &mut self.trucks[i];
                s.phase = if s.coordinated_departure.is_some() {
                    Phase::WaitingCoordinated
                } else {
                    Phase::WaitingUncoordinated
                };
            }
            EventKind::DestinationArrival => {
                self.trucks[i].phase = Phase::Done;
                self.itineraries[i].destination_arrival = Some(ev.time);
            }
            EventKind::TriggerCheck => {
                let hub = NodeId(ev.subject);
                let still_pending = self.pending.get(&hub).is_some_and(|p| p.contains(&ev.truck));
                if still_pending && self.last_instance.get(&hub) != Some(&ev.time) {
                    self.coordinate(hub, ev.time)?;
                }
            }
            EventKind::PlatoonDeparture => {
                let s = &self.trucks[i];
                let ann = s.announcement.as_ref().expect("waiting truck has announced");
                match s.coordinated_departure {
                    Some(t) if t == ev.time => {
                        let p = s.platoon;
                        self.depart(i, ev.time, p);
                    }
                    None if ann.latest_departure == ev.time => {
                        let hub = ann.hub;
                        let truck = ann.truck;
                        if let Some(p) = self.pending.get_mut(&hub) {
                            p.remove(&truck);
                        }
                        self.depart(i, ev.time, None);
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Truck `i` leaves its origin or current hub at `now`.
    fn depart(&mut self, i: usize, now: Time, platoon: Option<usize>) {
        let net = &self.scenario.network;
        let truck = &self.scenario.trucks[i];
        let state = &mut self.trucks[i];
        let next = if state.phase == Phase::AtOrigin {
            0
        } else {
            let ann = state.announcement.take().expect("truck at hub has announced");
            let wait = now - ann.arrival;
            debug_assert!(wait >= Duration::ZERO && wait <= state.budget_remaining);
            state.budget_remaining = state.budget_remaining - wait;
            let it = &mut self.itineraries[i];
            it.total_wait = it.total_wait + wait;
            it.visits.push(HubVisit {
                hub: ann.hub,
                arrival: ann.arrival,
                departure: now,
                wait,
                coordinated: state.coordinated_departure.is_some(),
                platoon,
            });
            state.segment + 1
        };
        state.segment = next;
        state.coordinated_departure = None;
        state.platoon = None;
        state.phase = Phase::EnRoute;
        let seg = &truck.segments[next];
        let arrival = now + travel_time(net, &seg.edges, self.params.speed_kmh);
        let (id, budget) = (truck.id, state.budget_remaining);
        if next + 1 == truck.segments.len() {
            self.push(arrival, EventKind::DestinationArrival, id.0, id, next);
            return;
        }
        let ann = Announcement {
            truck: id,
            fleet: truck.fleet,
            hub: seg.end,
            arrival,
            latest_departure: arrival + budget,
            next_segment: truck.segments[next + 1].clone(),
        };
        let check = (arrival - self.params.trigger_margin()).max(now);
        let (hub, latest) = (ann.hub, ann.latest_departure);
        self.trucks[i].announcement = Some(ann);
        self.pending.entry(hub).or_default().insert(id);
        self.push(arrival, EventKind::HubArrival, id.0, id, next);
        self.push(check, EventKind::TriggerCheck, hub.0, id, next);
        self.push(latest, EventKind::PlatoonDeparture, id.0, id, next);
    }

    fn solve(&self, batch: &Batch) -> Result<Solved, SimError> {
        let need_single = self.config.audit
            || matches!(
                self.config.strategy,
                StrategyKind::SingleFleet | StrategyKind::ParetoCrossFleet
            );
        let need_pareto = self.config.audit || self.config.strategy == StrategyKind::ParetoCrossFleet;
        let need_sysmax = self.config.audit || self.config.strategy == StrategyKind::SystemMax;

        let single = need_single.then(|| solve_single_fleet_all(batch)).transpose()?;
        let mut census = None;
        let pareto = match (&single, need_pareto) {
            (Some(s), true) => {
                let program = ParetoProgram::build(batch, &s.per_fleet_profit)?;
                census = Some(Census {
                    variables: program.problem.variable_count(),
                    constraints: program.problem.constraint_count(),
                });
                Some(solve_pareto_with_hint(batch, &s.per_fleet_profit, Some(&s.selected))?)
            }
            _ => None,
        };
        let sysmax = need_sysmax.then(|| solve_system_max(batch)).transpose()?;

        let (applied, solve_time_s) = match self.config.strategy {
            StrategyKind::SingleFleet => {
                let s = single.clone().unwrap();
                let t = s.solve_time_s;
                (s, t)
            }
            StrategyKind::ParetoCrossFleet => {
                let p = pareto.clone().unwrap();
                let t = p.solve_time_s + single.as_ref().unwrap().solve_time_s;
                (p, t)
            }
            StrategyKind::SystemMax => {
                let s = sysmax.clone().unwrap();
                let t = s.solve_time_s;
                (s, t)
            }
        };
        let audit = match (self.config.audit, &single, &pareto, &sysmax) {
            (true, Some(s), Some(p), Some(m)) => Some(AuditRecord {
                single_fleet: SolutionRecord::new(batch, s),
                pareto: SolutionRecord::new(batch, p),
                system_max: SolutionRecord::new(batch, m),
            }),
            _ => None,
        };
        Ok(Solved {
            applied,
            baseline: single.map(|s| s.per_fleet_profit),
            census,
            audit,
            solve_time_s,
        })
    }

    /// Runs one coordination instance at `hub`.
    fn coordinate(&mut self, hub: NodeId, now: Time) -> Result<(), SimError> {
        self.last_instance.insert(hub, now);
        let anns: Vec<Announcement> = self.pending[&hub]
            .iter()
            .map(|t| self.trucks[self.index[t]].announcement.clone().expect("pending truck announced"))
            .collect();
        let mut batch = select_batch(anns, self.params.max_batch_trucks, self.params.max_batch_platoons)?
            .with_departures_not_before(now);
        price_candidates(&mut batch, self.params, &self.scenario.network);
        let solved = self.solve(&batch)?;
        let id = self.instance_count;
        self.instance_count += 1;
        let trigger = batch.announcements[0].truck;

        for a in &batch.announcements {
            let s = &self.trucks[self.index[&a.truck]];
            if s.coordinated_departure.is_some() || s.announcement.as_ref() != Some(a) {
                return Err(SimError::StaleSolution(a.truck));
            }
        }

        for &p in &solved.applied.selected {
            let c = &batch.candidates[p];
            if c.is_singleton() {
                let v = c.members[0];
                let a = &batch.announcements[v];
                let alone_now = self.config.singleton_rule == SingletonRule::DepartAtArrival
                    && a.truck == trigger;
                if alone_now {
                    let departure = a.arrival.max(now);
                    self.assign(a.truck, departure, None);
                }
                continue;
            }
            let members = candidate_members(&batch, c);
            let net = &self.scenario.network;
            let edges = edge_memberships(&members)
                .into_iter()
                .map(|m| EdgeUse {
                    edge: m.edge,
                    length_m: net.edge(m.edge).length_m,
                    members: m.size(),
                    per_fleet: m.counts(),
                })
                .collect();
            let platoon = self.platoons.len();
            self.platoons.push(RealizedPlatoon {
                instance: id,
                hub,
                departure: c.departure,
                trucks: c.trucks.clone(),
                edges,
                per_fleet_profit: c.per_fleet_profit.clone(),
                total_profit: c.total_profit,
            });
            for t in c.trucks.clone() {
                self.assign(t, c.departure, Some(platoon));
            }
        }

        let entries: Vec<BatchEntry> = batch
            .announcements
            .iter()
            .map(|a| BatchEntry {
                truck: a.truck,
                fleet: a.fleet,
                arrival: a.arrival,
                latest_departure: a.latest_departure,
            })
            .collect();
        if self.config.dump_instances {
            self.dumps.push(InstanceDump {
                instance: id,
                hub,
                time: now,
                batch: entries.clone(),
                candidates: batch
                    .candidates
                    .iter()
                    .map(|c| PlatoonRecord {
                        trucks: c.trucks.clone(),
                        departure: c.departure,
                        per_fleet_profit: c.per_fleet_profit.clone(),
                        total_profit: c.total_profit,
                    })
                    .collect(),
                floors: (self.config.strategy == StrategyKind::ParetoCrossFleet)
                    .then(|| solved.baseline.clone())
                    .flatten(),
            });
        }
        self.logs.entry(hub).or_default().push(InstanceRecord {
            id,
            hub,
            time: now,
            trigger,
            batch: entries,
            fleets: batch.fleets.clone(),
            candidate_count: batch.candidates.len(),
            census: solved.census,
            applied: SolutionRecord::new(&batch, &solved.applied),
            baseline: solved.baseline,
            audit: solved.audit,
            solve_time_s: solved.solve_time_s,
        });
        Ok(())
    }

    /// Informs `truck` of its departure time, removing it from future batches.
    fn assign(&mut self, truck: TruckId, departure: Time, platoon: Option<usize>) {
        let i = self.index[&truck];
        let s = &mut self.trucks[i];
        let ann = s.announcement.as_ref().expect("assigned truck announced");
        debug_assert!(departure <= ann.latest_departure);
        if let Some(p) = self.pending.get_mut(&ann.hub) {
            p.remove(&truck);
        }
        s.coordinated_departure = Some(departure);
        s.platoon = platoon;
        if s.phase == Phase::WaitingUncoordinated {
            s.phase = Phase::WaitingCoordinated;
        }
        let leg = s.segment;
        self.push(departure, EventKind::PlatoonDeparture, truck.0, truck, leg);
    }

    fn finish(self) -> Result<SimulationResult, SimError> {
        let unfinished = self.trucks.iter().filter(|s| s.phase != Phase::Done).count();
        if unfinished > 0 {
            return Err(SimError::Stuck(unfinished));
        }
        let fleets = self.scenario.fleets();
        let mut fleet_profit: BTreeMap<FleetId, Money> =
            fleets.iter().map(|&f| (f, Money::ZERO)).collect();
        for p in &self.platoons {
            for (f, v) in &p.per_fleet_profit {
                *fleet_profit.entry(*f).or_default() += *v;
            }
        }
        let total_profit = fleet_profit.values().copied().sum();
        Ok(SimulationResult {
            strategy: self.config.strategy,
            seed: self.scenario.seed,
            singleton_rule: self.config.singleton_rule,
            params: self.params.clone(),
            fleets,
            itineraries: self.itineraries,
            hub_logs: self
                .logs
                .into_iter()
                .map(|(hub, instances)| HubLog { hub, instances })
                .collect(),
            platoons: self.platoons,
            fleet_profit,
            total_profit,
            instance_dumps: self.dumps,
        })
    }
}

struct Solved {
    applied: StrategySolution,
    baseline: Option<BTreeMap<FleetId, Money>>,
    census: Option<Census>,
    audit: Option<AuditRecord>,
    solve_time_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{NetworkBuilder, Path, RoadNetwork};
    use crate::scenario::{default_params, Truck};

    /// Hubs 0, 1, 2 on a line, 80 km apart: one hour per leg at 80 km/h.
    fn line() -> RoadNetwork {
        NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .hub(2)
            .two_way(0, 1, 80.0)
            .two_way(1, 2, 80.0)
            .build()
            .unwrap()
    }

    fn truck(net: &RoadNetwork, id: u32, fleet: u32, nodes: &[u32], start_min: f64, budget_min: f64) -> Truck {
        let nodes: Vec<NodeId> = nodes.iter().map(|&n| NodeId(n)).collect();
        Truck::new(
            net,
            TruckId(id),
            FleetId(fleet),
            Path::from_nodes(net, &nodes).unwrap(),
            Time::from_minutes(start_min),
            Duration::from_minutes(budget_min),
        )
        .unwrap()
    }

    fn scenario(trucks: Vec<Truck>) -> Scenario {
        Scenario::new(line(), trucks, Duration::from_hours(10.0), default_params(), 0).unwrap()
    }

    #[test]
    fn lone_truck_waits_out_budget_then_leaves() {
        let net = line();
        let sc = scenario(vec![truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0)]);
        for s in StrategyKind::ALL {
            let r = run(&sc, SimConfig::new(s)).unwrap();
            let it = &r.itineraries[0];
            assert_eq!(it.visits.len(), 1);
            assert!(!it.visits[0].coordinated);
            assert_eq!(it.total_wait, Duration::from_minutes(20.0));
            assert_eq!(r.total_profit, Money::ZERO);
            assert!(r.platoons.is_empty());
            assert_eq!(it.destination_arrival, Some(Time::from_hours(2.0) + it.total_wait));
        }
    }

    #[test]
    fn lone_truck_with_depart_rule_leaves_on_arrival() {
        let net = line();
        let sc = scenario(vec![truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0)]);
        let mut cfg = SimConfig::new(StrategyKind::SystemMax);
        cfg.singleton_rule = SingletonRule::DepartAtArrival;
        let r = run(&sc, cfg).unwrap();
        let it = &r.itineraries[0];
        assert_eq!(it.total_wait, Duration::ZERO);
        assert_eq!(it.destination_arrival, Some(Time::from_hours(2.0)));
    }

    #[test]
    fn direct_trip_makes_no_announcement() {
        let net = line();
        let sc = scenario(vec![truck(&net, 1, 1, &[0, 1], 0.0, 20.0)]);
        let r = run(&sc, SimConfig::new(StrategyKind::SystemMax)).unwrap();
        assert_eq!(r.instance_count(), 0);
        assert!(r.itineraries[0].visits.is_empty());
        assert_eq!(r.itineraries[0].destination_arrival, Some(Time::from_hours(1.0)));
    }

    #[test]
    fn pair_ten_minutes_apart_platoons() {
        let net = line();
        let sc = scenario(vec![
            truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0),
            truck(&net, 2, 2, &[0, 1, 2], 10.0, 20.0),
        ]);
        {
            let r = run(&sc, SimConfig::new(StrategyKind::SystemMax)).unwrap();
            assert_eq!(r.platoons.len(), 1);
            let p = &r.platoons[0];
            assert_eq!(p.trucks, vec![TruckId(1), TruckId(2)]);
            assert_eq!(p.departure, Time::from_minutes(70.0));
            let a = &r.itineraries[0];
            let b = &r.itineraries[1];
            assert_eq!(a.total_wait, Duration::from_minutes(10.0));
            assert_eq!(b.total_wait, Duration::ZERO);
            assert_eq!(a.destination_arrival, b.destination_arrival);
            assert_eq!(a.destination_arrival, Some(Time::from_minutes(130.0)));
            // 80 km at $0.0525 per follower-km, halved, less 10 minutes at $20/h
            assert_eq!(r.fleet_profit(FleetId(1)), Money::from_dollars(2.10 - 10.0 / 3.0));
            assert_eq!(r.fleet_profit(FleetId(2)), Money::from_dollars(2.10));
        }
    }

    #[test]
    fn pareto_refuses_pair_that_costs_a_fleet() {
        // the earlier truck's fleet would earn $2.10 and pay $3.33 for waiting
        let net = line();
        let sc = scenario(vec![
            truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0),
            truck(&net, 2, 2, &[0, 1, 2], 10.0, 20.0),
        ]);
        let r = run(&sc, SimConfig::new(StrategyKind::ParetoCrossFleet)).unwrap();
        assert!(r.platoons.is_empty());
        assert_eq!(r.instance_count(), 2);
        for it in &r.itineraries {
            assert_eq!(it.total_wait, it.waiting_budget);
        }
    }

    #[test]
    fn pair_same_fleet_platoons_under_single_fleet() {
        let net = line();
        let sc = scenario(vec![
            truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0),
            truck(&net, 2, 1, &[0, 1, 2], 2.0, 20.0),
        ]);
        let r = run(&sc, SimConfig::new(StrategyKind::SingleFleet)).unwrap();
        assert_eq!(r.platoons.len(), 1);
    }

    #[test]
    fn cross_fleet_pair_ignored_by_single_fleet() {
        let net = line();
        let sc = scenario(vec![
            truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0),
            truck(&net, 2, 2, &[0, 1, 2], 2.0, 20.0),
        ]);
        let r = run(&sc, SimConfig::new(StrategyKind::SingleFleet)).unwrap();
        assert!(r.platoons.is_empty());
    }

    #[test]
    fn short_budgets_prevent_platoon() {
        let net = line();
        let sc = scenario(vec![
            truck(&net, 1, 1, &[0, 1, 2], 0.0, 5.0),
            truck(&net, 2, 2, &[0, 1, 2], 10.0, 5.0),
        ]);
        let r = run(&sc, SimConfig::new(StrategyKind::SystemMax)).unwrap();
        assert!(r.platoons.is_empty());
        for it in &r.itineraries {
            assert!(it.total_wait <= it.waiting_budget);
        }
    }

    #[test]
    fn zero_budget_leaves_at_arrival() {
        let net = line();
        let sc = scenario(vec![truck(&net, 1, 1, &[0, 1, 2], 0.0, 0.0)]);
        let r = run(&sc, SimConfig::new(StrategyKind::ParetoCrossFleet)).unwrap();
        assert_eq!(r.itineraries[0].visits[0].departure, Time::from_hours(1.0));
    }

    #[test]
    fn announcement_window_uses_remaining_budget() {
        let net = line();
        let sc = scenario(vec![truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0)]);
        let r = run(&sc, SimConfig::new(StrategyKind::SystemMax)).unwrap();
        let inst = r.instances().next().unwrap();
        assert_eq!(inst.batch[0].arrival, Time::from_hours(1.0));
        assert_eq!(inst.batch[0].latest_departure, Time::from_minutes(80.0));
        assert_eq!(inst.time, Time::from_minutes(55.0));
    }

    #[test]
    fn audit_records_all_strategies() {
        let net = line();
        let sc = scenario(vec![
            truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0),
            truck(&net, 2, 2, &[0, 1, 2], 1.0, 20.0),
            truck(&net, 3, 1, &[0, 1, 2], 3.0, 20.0),
        ]);
        let r = run(&sc, SimConfig::new(StrategyKind::ParetoCrossFleet).with_audit(true)).unwrap();
        for inst in r.instances() {
            let a = inst.audit.as_ref().unwrap();
            assert!(a.system_max.total_profit >= a.pareto.total_profit);
            assert!(a.pareto.total_profit >= a.single_fleet.total_profit);
            let c = inst.census.unwrap();
            assert_eq!(c.variables, inst.candidate_count);
            assert_eq!(c.constraints, inst.batch.len() + inst.fleets.len());
        }
    }

    #[test]
    fn event_order_breaks_ties_by_kind_then_subject() {
        let mk = |kind, subject, seq| Event {
            time: Time(5),
            kind,
            subject,
            truck: TruckId(subject),
            leg: 0,
            seq,
        };
        let mut v = [
            mk(EventKind::OriginDeparture, 1, 1),
            mk(EventKind::HubArrival, 9, 2),
            mk(EventKind::HubArrival, 2, 3),
            mk(EventKind::TriggerCheck, 0, 4),
        ];
        v.sort();
        let order: Vec<(EventKind, u32)> = v.iter().map(|e| (e.kind, e.subject)).collect();
        assert_eq!(
            order,
            vec![
                (EventKind::HubArrival, 2),
                (EventKind::HubArrival, 9),
                (EventKind::TriggerCheck, 0),
                (EventKind::OriginDeparture, 1),
            ]
        );
    }

    #[test]
    fn result_round_trips_through_json() {
        let net = line();
        let sc = scenario(vec![
            truck(&net, 1, 1, &[0, 1, 2], 0.0, 20.0),
            truck(&net, 2, 2, &[0, 1, 2], 10.0, 20.0),
        ]);
        let r = run(&sc, SimConfig::new(StrategyKind::SystemMax)).unwrap();
        let back = SimulationResult::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
