//! The three coordination programs solved at every coordination instance.
//!
//! * single-fleet: each fleet partitions its own trucks using platoons made
//!   only of its trucks, maximizing its own profit;
//! * Pareto-improving cross-fleet: maximize total profit over all platoons,
//!   subject to every fleet earning at least its single-fleet profit;
//! * system maximum: maximize total profit with no per-fleet floor.
//!
//! All three are set-partitioning programs handed to [`crate::cover`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{CoverError, CoverProblem};
use crate::feasibility::Batch;
use crate::scenario::FleetId;
use crate::units::Money;

/// Largest batch the exhaustive oracle accepts.
pub const ORACLE_MAX_TRUCKS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    SingleFleet,
    ParetoCrossFleet,
    SystemMax,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::SingleFleet,
        StrategyKind::ParetoCrossFleet,
        StrategyKind::SystemMax,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            StrategyKind::SingleFleet => "single",
            StrategyKind::ParetoCrossFleet => "pareto",
            StrategyKind::SystemMax => "sysmax",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" | "single_fleet" => Ok(StrategyKind::SingleFleet),
            "pareto" | "pareto_cross_fleet" => Ok(StrategyKind::ParetoCrossFleet),
            "sysmax" | "system_max" => Ok(StrategyKind::SystemMax),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error("{0} has no trucks in the batch")]
    FleetNotInBatch(FleetId),
    #[error("no single-fleet baseline given for {0}")]
    MissingBaseline(FleetId),
    #[error("oracle limited to {ORACLE_MAX_TRUCKS} trucks, batch has {0}")]
    TooLarge(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySolution {
    pub strategy: StrategyKind,
    /// Indices into the batch's candidate list, ascending.
    pub selected: Vec<usize>,
    pub per_fleet_profit: BTreeMap<FleetId, Money>,
    pub total_profit: Money,
    /// Wall-clock seconds spent solving.
    pub solve_time_s: f64,
}

impl StrategySolution {
    fn from_selection(
        batch: &Batch,
        strategy: StrategyKind,
        mut selected: Vec<usize>,
        fleets: &[FleetId],
        started: Instant,
    ) -> Self {
        selected.sort_unstable();
        let per_fleet_profit: BTreeMap<FleetId, Money> = fleets
            .iter()
            .map(|&f| {
                let v = selected
                    .iter()
                    .map(|&p| batch.candidates[p].fleet_profit(f))
                    .sum();
                (f, v)
            })
            .collect();
        let total_profit = selected
            .iter()
            .map(|&p| batch.candidates[p].total_profit)
            .sum();
        StrategySolution {
            strategy,
            selected,
            per_fleet_profit,
            total_profit,
            solve_time_s: started.elapsed().as_secs_f64(),
        }
    }

    pub fn fleet_profit(&self, fleet: FleetId) -> Money {
        self.per_fleet_profit.get(&fleet).copied().unwrap_or_default()
    }
}

fn cover_masks(batch: &Batch, indices: &[usize], relabel: &BTreeMap<usize, usize>) -> Vec<u64> {
    indices
        .iter()
        .map(|&p| {
            batch.candidates[p]
                .members
                .iter()
                .fold(0u64, |m, v| m | (1 << relabel[v]))
        })
        .collect()
}

/// Fleet `fleet` alone, restricted to platoons made only of its own trucks.
pub fn solve_single_fleet(batch: &Batch, fleet: FleetId) -> Result<StrategySolution, StrategyError> {
    let started = Instant::now();
    let members = batch.fleet_members(fleet);
    if members.is_empty() {
        return Err(StrategyError::FleetNotInBatch(fleet));
    }
    let relabel: BTreeMap<usize, usize> = members.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let pure = batch.pure_fleet_candidates(fleet);
    let weights = pure
        .iter()
        .map(|&p| batch.candidates[p].fleet_profit(fleet).micros())
        .collect();
    let problem = CoverProblem::new(members.len(), cover_masks(batch, &pure, &relabel), weights);
    let sol = problem.solve()?;
    let selected = sol.selected.iter().map(|&i| pure[i]).collect();
    Ok(StrategySolution::from_selection(
        batch,
        StrategyKind::SingleFleet,
        selected,
        &[fleet],
        started,
    ))
}

/// Every fleet of the batch solved on its own; the union of their selections.
pub fn solve_single_fleet_all(batch: &Batch) -> Result<StrategySolution, StrategyError> {
    let started = Instant::now();
    let mut selected = Vec::new();
    for &f in &batch.fleets {
        selected.extend(solve_single_fleet(batch, f)?.selected);
    }
    Ok(StrategySolution::from_selection(
        batch,
        StrategyKind::SingleFleet,
        selected,
        &batch.fleets,
        started,
    ))
}

/// The cross-fleet program: one variable per feasible platoon, one partition
/// row per truck and one profit floor per fleet present.
#[derive(Clone, Debug)]
pub struct ParetoProgram {
    pub problem: CoverProblem,
    pub fleets: Vec<FleetId>,
}

impl ParetoProgram {
    pub fn build(batch: &Batch, baseline: &BTreeMap<FleetId, Money>) -> Result<Self, StrategyError> {
        let all: Vec<usize> = (0..batch.candidates.len()).collect();
        let identity: BTreeMap<usize, usize> = (0..batch.len()).map(|v| (v, v)).collect();
        let weights = batch
            .candidates
            .iter()
            .map(|c| c.total_profit.micros())
            .collect();
        let mut problem = CoverProblem::new(batch.len(), cover_masks(batch, &all, &identity), weights);
        for &f in &batch.fleets {
            let floor = baseline.get(&f).ok_or(StrategyError::MissingBaseline(f))?;
            let w = batch
                .candidates
                .iter()
                .map(|c| c.fleet_profit(f).micros())
                .collect();
            problem = problem.with_side(w, floor.micros());
        }
        assert_eq!(problem.variable_count(), batch.candidates.len());
        assert_eq!(problem.constraint_count(), batch.len() + batch.fleets.len());
        Ok(ParetoProgram {
            problem,
            fleets: batch.fleets.clone(),
        })
    }
}

pub fn solve_pareto(
    batch: &Batch,
    baseline: &BTreeMap<FleetId, Money>,
) -> Result<StrategySolution, StrategyError> {
    solve_pareto_with_hint(batch, baseline, None)
}

/// As [`solve_pareto`], seeding the search with a feasible selection such as
/// the combined single-fleet solution.
pub fn solve_pareto_with_hint(
    batch: &Batch,
    baseline: &BTreeMap<FleetId, Money>,
    hint: Option<&[usize]>,
) -> Result<StrategySolution, StrategyError> {
    let started = Instant::now();
    let program = ParetoProgram::build(batch, baseline)?;
    let sol = program.problem.solve_with_hint(hint)?;
    Ok(StrategySolution::from_selection(
        batch,
        StrategyKind::ParetoCrossFleet,
        sol.selected,
        &batch.fleets,
        started,
    ))
}

pub fn solve_system_max(batch: &Batch) -> Result<StrategySolution, StrategyError> {
    let started = Instant::now();
    let all: Vec<usize> = (0..batch.candidates.len()).collect();
    let identity: BTreeMap<usize, usize> = (0..batch.len()).map(|v| (v, v)).collect();
    let weights = batch
        .candidates
        .iter()
        .map(|c| c.total_profit.micros())
        .collect();
    let problem = CoverProblem::new(batch.len(), cover_masks(batch, &all, &identity), weights);
    let sol = problem.solve()?;
    Ok(StrategySolution::from_selection(
        batch,
        StrategyKind::SystemMax,
        sol.selected,
        &batch.fleets,
        started,
    ))
}

/// Exhaustive reference solver for batches of at most [`ORACLE_MAX_TRUCKS`]
/// trucks. Enumerates every exact cover by candidate platoons, applies the
/// per-fleet floors for the Pareto strategy, and returns the best cover with
/// ties going to the lexicographically smallest index list. The single-fleet
/// strategy is answered fleet by fleet and combined.
pub fn brute_force_oracle(
    batch: &Batch,
    strategy: StrategyKind,
    baseline: Option<&BTreeMap<FleetId, Money>>,
) -> Result<StrategySolution, StrategyError> {
    let started = Instant::now();
    if batch.len() > ORACLE_MAX_TRUCKS {
        return Err(StrategyError::TooLarge(batch.len()));
    }
    let trucks: BTreeSet<usize> = (0..batch.len()).collect();
    let selected = match strategy {
        StrategyKind::SingleFleet => {
            let mut sel = Vec::new();
            for &f in &batch.fleets {
                let own: BTreeSet<usize> = batch.fleet_members(f).into_iter().collect();
                let pool = batch.pure_fleet_candidates(f);
                let best = all_exact_covers(batch, &own, &pool)
                    .into_iter()
                    .map(|c| {
                        let v: Money = c.iter().map(|&p| batch.candidates[p].fleet_profit(f)).sum();
                        (v, c)
                    })
                    .reduce(pick_better)
                    .ok_or(StrategyError::Cover(CoverError::Infeasible))?;
                sel.extend(best.1);
            }
            sel
        }
        StrategyKind::ParetoCrossFleet | StrategyKind::SystemMax => {
            let floors = if strategy == StrategyKind::ParetoCrossFleet {
                let b = baseline.ok_or_else(|| {
                    StrategyError::MissingBaseline(batch.fleets.first().copied().unwrap_or(FleetId(0)))
                })?;
                for f in &batch.fleets {
                    if !b.contains_key(f) {
                        return Err(StrategyError::MissingBaseline(*f));
                    }
                }
                Some(b)
            } else {
                None
            };
            let pool: Vec<usize> = (0..batch.candidates.len()).collect();
            all_exact_covers(batch, &trucks, &pool)
                .into_iter()
                .filter(|c| {
                    floors.is_none_or(|b| {
                        batch.fleets.iter().all(|f| {
                            let got: Money =
                                c.iter().map(|&p| batch.candidates[p].fleet_profit(*f)).sum();
                            got >= b[f]
                        })
                    })
                })
                .map(|c| {
                    let v: Money = c.iter().map(|&p| batch.candidates[p].total_profit).sum();
                    (v, c)
                })
                .reduce(pick_better)
                .ok_or(StrategyError::Cover(CoverError::Infeasible))?
                .1
        }
    };
    Ok(StrategySolution::from_selection(
        batch,
        strategy,
        selected,
        &batch.fleets,
        started,
    ))
}

fn pick_better(a: (Money, Vec<usize>), b: (Money, Vec<usize>)) -> (Money, Vec<usize>) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}

/// Every way to partition `trucks` into candidates drawn from `pool`, each
/// as a sorted list of candidate indices.
fn all_exact_covers(batch: &Batch, trucks: &BTreeSet<usize>, pool: &[usize]) -> Vec<Vec<usize>> {
    fn go(
        batch: &Batch,
        left: &BTreeSet<usize>,
        pool: &[usize],
        acc: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let Some(&first) = left.iter().next() else {
            let mut s = acc.clone();
            s.sort_unstable();
            out.push(s);
            return;
        };
        for &p in pool {
            let members = &batch.candidates[p].members;
            if members.contains(&first) && members.iter().all(|v| left.contains(v)) {
                let rest: BTreeSet<usize> =
                    left.iter().filter(|v| !members.contains(v)).copied().collect();
                acc.push(p);
                go(batch, &rest, pool, acc, out);
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(batch, trucks, pool, &mut Vec::new(), &mut out);
    out
}

/// Solutions of all three programs for one batch.
#[derive(Clone, Debug)]
pub struct CoordinationOutcome {
    pub single_fleet: StrategySolution,
    pub pareto: StrategySolution,
    pub system_max: StrategySolution,
}

pub fn solve_all(batch: &Batch) -> Result<CoordinationOutcome, StrategyError> {
    let single_fleet = solve_single_fleet_all(batch)?;
    let pareto =
        solve_pareto_with_hint(batch, &single_fleet.per_fleet_profit, Some(&single_fleet.selected))?;
    let system_max = solve_system_max(batch)?;
    Ok(CoordinationOutcome {
        single_fleet,
        pareto,
        system_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::{select_batch, Announcement};
    use crate::network::{NetworkBuilder, NodeId, PathSegment, RoadNetwork};
    use crate::profit::price_candidates;
    use crate::scenario::{default_params, EconomicParams, TruckId};
    use crate::units::Time;

    /// Hubs 0..=3 on a line: 0 -(200)- 1 -(100)- 2 -(10)- 3.
    fn line() -> RoadNetwork {
        NetworkBuilder::default()
            .hub(0)
            .hub(1)
            .hub(2)
            .hub(3)
            .two_way(0, 1, 200.0)
            .two_way(1, 2, 100.0)
            .two_way(2, 3, 10.0)
            .build()
            .unwrap()
    }

    fn on(net: &RoadNetwork, truck: u32, fleet: u32, from: u32, to: u32, arrival_min: f64) -> Announcement {
        let e = net.edge_between(NodeId(from), NodeId(to)).unwrap();
        Announcement {
            truck: TruckId(truck),
            fleet: FleetId(fleet),
            hub: NodeId(from),
            arrival: Time::from_minutes(arrival_min),
            latest_departure: Time::from_minutes(arrival_min + 20.0),
            next_segment: PathSegment {
                start: NodeId(from),
                end: NodeId(to),
                edges: vec![e],
            },
        }
    }

    fn priced(net: &RoadNetwork, anns: Vec<Announcement>, params: &EconomicParams) -> Batch {
        let mut b = select_batch(anns, 25, 6000).unwrap();
        price_candidates(&mut b, params, net);
        b
    }

    fn members(b: &Batch, s: &StrategySolution) -> Vec<Vec<TruckId>> {
        s.selected.iter().map(|&p| b.candidates[p].trucks.clone()).collect()
    }

    #[test]
    fn lone_fleet_truck_stays_single() {
        let net = line();
        let b = priced(&net, vec![on(&net, 1, 1, 1, 2, 0.0)], &default_params());
        let s = solve_single_fleet(&b, FleetId(1)).unwrap();
        assert_eq!(members(&b, &s), vec![vec![TruckId(1)]]);
        assert_eq!(s.total_profit, Money::ZERO);
        assert_eq!(
            solve_single_fleet(&b, FleetId(2)).unwrap_err(),
            StrategyError::FleetNotInBatch(FleetId(2))
        );
    }

    #[test]
    fn same_fleet_pair_platoons() {
        let net = line();
        let b = priced(
            &net,
            vec![on(&net, 1, 1, 1, 2, 0.0), on(&net, 2, 1, 1, 2, 0.0)],
            &default_params(),
        );
        let s = solve_single_fleet(&b, FleetId(1)).unwrap();
        assert_eq!(members(&b, &s), vec![vec![TruckId(1), TruckId(2)]]);
        assert_eq!(s.total_profit, Money::from_dollars(5.25));
    }

    #[test]
    fn unprofitable_pair_stays_apart() {
        // 10 km shared edge earns $0.525; a 15 minute wait costs $5
        let net = line();
        let b = priced(
            &net,
            vec![on(&net, 1, 1, 2, 3, 0.0), on(&net, 2, 1, 2, 3, 15.0)],
            &default_params(),
        );
        let pair = b.candidates.iter().find(|c| c.size() == 2).unwrap();
        assert!(pair.total_profit < Money::ZERO);
        let s = solve_single_fleet(&b, FleetId(1)).unwrap();
        assert_eq!(s.selected.len(), 2);
        assert_eq!(s.total_profit, Money::ZERO);
    }

    #[test]
    fn pareto_equals_baseline_without_cross_gain() {
        let net = line();
        let b = priced(
            &net,
            vec![on(&net, 1, 1, 1, 2, 0.0), on(&net, 2, 1, 1, 2, 0.0), on(&net, 3, 2, 1, 0, 0.0)],
            &default_params(),
        );
        let single = solve_single_fleet_all(&b).unwrap();
        let p = solve_pareto(&b, &single.per_fleet_profit).unwrap();
        assert_eq!(p.selected, single.selected);
        assert_eq!(p.per_fleet_profit, single.per_fleet_profit);
    }

    #[test]
    fn cross_fleet_pair_selected() {
        let net = line();
        let b = priced(
            &net,
            vec![on(&net, 1, 1, 0, 1, 0.0), on(&net, 2, 2, 0, 1, 0.0)],
            &default_params(),
        );
        let single = solve_single_fleet_all(&b).unwrap();
        assert_eq!(single.total_profit, Money::ZERO);
        let p = solve_pareto(&b, &single.per_fleet_profit).unwrap();
        assert_eq!(members(&b, &p), vec![vec![TruckId(1), TruckId(2)]]);
        assert_eq!(p.fleet_profit(FleetId(1)), Money::from_dollars(5.25));
        assert_eq!(p.fleet_profit(FleetId(2)), Money::from_dollars(5.25));
    }

    /// Four trucks on the 200 km edge: fleet 1 has a and b (both arrive at 0),
    /// fleet 2 has c (arrives at 0) and d (arrives at 6 min). Without floors
    /// the best cover is {a,b,c,d} minus whatever waiting costs; fleet 1's
    /// baseline is the a-b pair worth $10.50.
    #[test]
    fn pareto_differs_from_system_max_when_floor_binds() {
        let net = line();
        let b = priced(
            &net,
            vec![
                on(&net, 1, 1, 0, 1, 0.0),
                on(&net, 2, 1, 0, 1, 6.0),
                on(&net, 3, 2, 0, 1, 0.0),
                on(&net, 4, 2, 0, 1, 6.0),
            ],
            &default_params(),
        );
        let single = solve_single_fleet_all(&b).unwrap();
        let pareto = solve_pareto(&b, &single.per_fleet_profit).unwrap();
        let sysmax = solve_system_max(&b).unwrap();
        for s in [&single, &pareto, &sysmax] {
            let o = brute_force_oracle(&b, s.strategy, Some(&single.per_fleet_profit)).unwrap();
            assert_eq!(o.selected, s.selected);
            assert_eq!(o.total_profit, s.total_profit);
        }
        assert!(sysmax.total_profit >= pareto.total_profit);
        assert!(pareto.total_profit >= single.total_profit);
        for f in &b.fleets {
            assert!(pareto.fleet_profit(*f) >= single.fleet_profit(*f));
        }
    }

    #[test]
    fn system_max_all_singletons() {
        let net = line();
        let b = priced(
            &net,
            vec![on(&net, 1, 1, 1, 2, 0.0), on(&net, 2, 2, 1, 0, 0.0)],
            &default_params(),
        );
        let s = solve_system_max(&b).unwrap();
        assert_eq!(s.selected, vec![0, 1]);
        assert_eq!(s.total_profit, Money::ZERO);
    }

    #[test]
    fn system_max_prefers_triple() {
        let net = line();
        let b = priced(
            &net,
            (1..=3).map(|i| on(&net, i, i, 0, 1, 0.0)).collect(),
            &default_params(),
        );
        let s = solve_system_max(&b).unwrap();
        assert_eq!(members(&b, &s), vec![vec![TruckId(1), TruckId(2), TruckId(3)]]);
        assert_eq!(s.total_profit, Money::from_dollars(2.0 * 10.5));
    }

    #[test]
    fn pareto_requires_every_baseline() {
        let net = line();
        let b = priced(
            &net,
            vec![on(&net, 1, 1, 0, 1, 0.0), on(&net, 2, 2, 0, 1, 0.0)],
            &default_params(),
        );
        let partial: BTreeMap<FleetId, Money> = [(FleetId(1), Money::ZERO)].into();
        assert_eq!(
            solve_pareto(&b, &partial).unwrap_err(),
            StrategyError::MissingBaseline(FleetId(2))
        );
    }

    #[test]
    fn oracle_rejects_large_batches() {
        let net = line();
        let anns = (0..13).map(|i| on(&net, i, 1, 0, 1, i as f64 * 30.0)).collect();
        let b = priced(&net, anns, &default_params());
        assert_eq!(b.len(), 13);
        assert_eq!(
            brute_force_oracle(&b, StrategyKind::SystemMax, None).unwrap_err(),
            StrategyError::TooLarge(13)
        );
    }

    #[test]
    fn pareto_census() {
        let net = line();
        let b = priced(
            &net,
            vec![on(&net, 1, 1, 0, 1, 0.0), on(&net, 2, 2, 0, 1, 0.0), on(&net, 3, 3, 0, 1, 1.0)],
            &default_params(),
        );
        let base: BTreeMap<FleetId, Money> = b.fleets.iter().map(|&f| (f, Money::ZERO)).collect();
        let prog = ParetoProgram::build(&b, &base).unwrap();
        assert_eq!(prog.problem.variable_count(), 7);
        assert_eq!(prog.problem.constraint_count(), 3 + 3);
    }

    #[test]
    fn strategy_names_parse() {
        for s in StrategyKind::ALL {
            assert_eq!(s.short_name().parse::<StrategyKind>().unwrap(), s);
        }
        assert!("both".parse::<StrategyKind>().is_err());
    }
}
