//! Replays the invariant suite against a stored simulation result.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::metrics::fuel_reduction;
use crate::scenario::{FleetId, TruckId};
use crate::sim::{InstanceRecord, SimulationResult, SolutionRecord};
use crate::strategies::StrategyKind;
use crate::units::{Duration, Money};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Invariant {
    BudgetSafety,
    ExactCover,
    SinglePlatoonMembership,
    DepartureHonesty,
    ParetoFloor,
    StrategyOrder,
    FuelBound,
    Census,
    AllDone,
    ProfitConsistency,
}

impl Invariant {
    pub fn name(self) -> &'static str {
        match self {
            Invariant::BudgetSafety => "budget-safety",
            Invariant::ExactCover => "exact-cover",
            Invariant::SinglePlatoonMembership => "single-platoon-membership",
            Invariant::DepartureHonesty => "departure-honesty",
            Invariant::ParetoFloor => "pareto-floor",
            Invariant::StrategyOrder => "strategy-order",
            Invariant::FuelBound => "fuel-bound",
            Invariant::Census => "census",
            Invariant::AllDone => "all-done",
            Invariant::ProfitConsistency => "profit-consistency",
        }
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub invariant: Invariant,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

struct Checker {
    found: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, invariant: Invariant, detail: String) {
        self.found.push(Violation { invariant, detail });
    }
}

/// Every invariant violation in `result`; empty when it is sound.
pub fn verify(result: &SimulationResult) -> Vec<Violation> {
    let mut c = Checker { found: Vec::new() };
    check_itineraries(result, &mut c);
    for inst in result.instances() {
        check_instance(result, inst, &mut c);
    }
    check_platoons(result, &mut c);
    check_profit(result, &mut c);
    let fraction = result.params.fuel_saving_fraction;
    let fuel = fuel_reduction(result, fraction);
    if !(0.0..=100.0 * fraction + 1e-9).contains(&fuel) {
        c.fail(
            Invariant::FuelBound,
            format!("fuel reduction {fuel:.4}% outside [0, {:.4}]%", 100.0 * fraction),
        );
    }
    c.found
}

fn check_itineraries(result: &SimulationResult, c: &mut Checker) {
    for it in &result.itineraries {
        let mut sum = Duration::ZERO;
        for v in &it.visits {
            if v.wait < Duration::ZERO || v.departure - v.arrival != v.wait {
                c.fail(
                    Invariant::BudgetSafety,
                    format!("{} has an inconsistent wait at {}", it.truck, v.hub),
                );
            }
            sum = sum + v.wait;
        }
        if sum != it.total_wait || it.total_wait > it.waiting_budget {
            c.fail(
                Invariant::BudgetSafety,
                format!(
                    "{} waited {:.2} min against a budget of {:.2} min",
                    it.truck,
                    sum.as_minutes(),
                    it.waiting_budget.as_minutes()
                ),
            );
        }
        if it.destination_arrival.is_none() {
            c.fail(Invariant::AllDone, format!("{} never reached its destination", it.truck));
        }
    }
}

fn check_cover(inst: &InstanceRecord, sol: &SolutionRecord, c: &mut Checker) {
    let batch: BTreeSet<TruckId> = inst.batch.iter().map(|b| b.truck).collect();
    let mut seen: BTreeMap<TruckId, usize> = BTreeMap::new();
    for p in &sol.platoons {
        for t in &p.trucks {
            *seen.entry(*t).or_default() += 1;
        }
    }
    for (t, n) in &seen {
        if *n > 1 {
            c.fail(
                Invariant::SinglePlatoonMembership,
                format!("{t} is in {n} platoons of instance {} ({})", inst.id, sol.strategy),
            );
        }
    }
    let covered: BTreeSet<TruckId> = seen.keys().copied().collect();
    if covered != batch {
        c.fail(
            Invariant::ExactCover,
            format!("instance {} ({}) does not cover its batch exactly", inst.id, sol.strategy),
        );
    }
}

fn check_instance(result: &SimulationResult, inst: &InstanceRecord, c: &mut Checker) {
    check_cover(inst, &inst.applied, c);
    if let Some(a) = &inst.audit {
        for sol in [&a.single_fleet, &a.pareto, &a.system_max] {
            check_cover(inst, sol, c);
        }
        if a.system_max.total_profit < a.pareto.total_profit
            || a.pareto.total_profit < a.single_fleet.total_profit
        {
            c.fail(
                Invariant::StrategyOrder,
                format!(
                    "instance {}: system max {}, pareto {}, single fleet {}",
                    inst.id,
                    a.system_max.total_profit,
                    a.pareto.total_profit,
                    a.single_fleet.total_profit
                ),
            );
        }
        check_floor(inst, &a.pareto, &a.single_fleet.per_fleet_profit, c);
    }
    if result.strategy == StrategyKind::ParetoCrossFleet {
        match &inst.baseline {
            Some(b) => check_floor(inst, &inst.applied, b, c),
            None => c.fail(
                Invariant::ParetoFloor,
                format!("instance {} has no recorded baseline", inst.id),
            ),
        }
    }
    let p = &result.params;
    if inst.batch.len() > p.max_batch_trucks || inst.candidate_count > p.max_batch_platoons {
        c.fail(
            Invariant::Census,
            format!(
                "instance {} has {} trucks and {} platoons, above the caps",
                inst.id,
                inst.batch.len(),
                inst.candidate_count
            ),
        );
    }
    if let Some(census) = inst.census {
        if census.variables != inst.candidate_count
            || census.constraints != inst.batch.len() + inst.fleets.len()
        {
            c.fail(
                Invariant::Census,
                format!(
                    "instance {}: {} variables and {} constraints for {} platoons, {} trucks, {} fleets",
                    inst.id,
                    census.variables,
                    census.constraints,
                    inst.candidate_count,
                    inst.batch.len(),
                    inst.fleets.len()
                ),
            );
        }
    }
}

fn check_floor(
    inst: &InstanceRecord,
    sol: &SolutionRecord,
    baseline: &BTreeMap<FleetId, Money>,
    c: &mut Checker,
) {
    for f in &inst.fleets {
        let floor = baseline.get(f).copied().unwrap_or_default();
        if sol.fleet_profit(*f) < floor {
            c.fail(
                Invariant::ParetoFloor,
                format!(
                    "instance {}: {f} earns {} below its single-fleet profit {floor}",
                    inst.id,
                    sol.fleet_profit(*f)
                ),
            );
        }
    }
}

fn check_platoons(result: &SimulationResult, c: &mut Checker) {
    let by_truck: BTreeMap<TruckId, usize> = result
        .itineraries
        .iter()
        .enumerate()
        .map(|(i, it)| (it.truck, i))
        .collect();
    let mut memberships: BTreeMap<(usize, TruckId), usize> = BTreeMap::new();
    for (idx, p) in result.platoons.iter().enumerate() {
        for t in &p.trucks {
            let n = memberships.entry((p.instance, *t)).or_default();
            *n += 1;
            if *n == 2 {
                c.fail(
                    Invariant::SinglePlatoonMembership,
                    format!("{t} is in two platoons formed by instance {}", p.instance),
                );
            }
            let visit = by_truck
                .get(t)
                .and_then(|&i| result.itineraries[i].visits.iter().find(|v| v.platoon == Some(idx)));
            match visit {
                Some(v) if v.departure == p.departure && v.hub == p.hub => {}
                Some(v) => c.fail(
                    Invariant::DepartureHonesty,
                    format!(
                        "{t} left {} at {:.4} h, informed {:.4} h",
                        v.hub,
                        v.departure.as_hours(),
                        p.departure.as_hours()
                    ),
                ),
                None => c.fail(
                    Invariant::DepartureHonesty,
                    format!("{t} never left with platoon {idx}"),
                ),
            }
        }
    }
}

fn check_profit(result: &SimulationResult, c: &mut Checker) {
    let mut from_platoons: BTreeMap<FleetId, Money> =
        result.fleets.iter().map(|&f| (f, Money::ZERO)).collect();
    for p in &result.platoons {
        for (f, v) in &p.per_fleet_profit {
            *from_platoons.entry(*f).or_default() += *v;
        }
    }
    let mut from_instances = from_platoons.clone();
    from_instances.values_mut().for_each(|v| *v = Money::ZERO);
    for inst in result.instances() {
        for (f, v) in &inst.applied.per_fleet_profit {
            *from_instances.entry(*f).or_default() += *v;
        }
    }
    let total: Money = result.fleet_profit.values().copied().sum();
    if from_platoons != result.fleet_profit
        || from_instances != result.fleet_profit
        || total != result.total_profit
    {
        c.fail(
            Invariant::ProfitConsistency,
            "fleet totals differ from the platoons and instances recorded".to_string(),
        );
    }
}
