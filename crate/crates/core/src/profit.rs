//! Platoon departure times, per-edge platooning rewards, waiting costs and
//! per-fleet platoon profits.
//!
//! Rewards and costs are kept as exact rationals of micro-dollars and rounded
//! half-to-even once per (platoon, fleet). The platoon total is the sum of the
//! rounded fleet shares so that objective and per-fleet constraints agree.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::Zero;
use thiserror::Error;

use crate::feasibility::{Announcement, Batch, CandidatePlatoon};
use crate::network::{EdgeId, RoadNetwork};
use crate::scenario::{EconomicParams, FleetId, TruckId};
use crate::units::{Money, Time, MS_PER_HOUR};

/// Exact amount of micro-dollars.
pub type Exact = Ratio<i128>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfitError {
    #[error("platoon is infeasible: latest arrival {max_arrival} after earliest latest departure {min_latest}")]
    Infeasible { max_arrival: Time, min_latest: Time },
    #[error("platoon has no members")]
    Empty,
}

/// Earliest departure at which every member can leave together.
pub fn departure_time(members: &[&Announcement]) -> Result<Time, ProfitError> {
    let max_arrival = members.iter().map(|a| a.arrival).max().ok_or(ProfitError::Empty)?;
    let min_latest = members.iter().map(|a| a.latest_departure).min().unwrap();
    if max_arrival > min_latest {
        return Err(ProfitError::Infeasible {
            max_arrival,
            min_latest,
        });
    }
    Ok(max_arrival)
}

/// Splits the reward of the `n - 1` followers on one edge among fleets in
/// proportion to how many of the `n` trucks on the edge each fleet has.
pub fn edge_reward(rho: Money, counts: &BTreeMap<FleetId, usize>) -> BTreeMap<FleetId, Exact> {
    let n: usize = counts.values().sum();
    counts
        .iter()
        .map(|(&f, &c)| {
            let share = if n == 0 {
                Exact::zero()
            } else {
                Exact::new(
                    rho.micros() as i128 * (n as i128 - 1) * c as i128,
                    n as i128,
                )
            };
            (f, share)
        })
        .collect()
}

/// Cost of the given trucks waiting from their arrivals until `departure`.
pub fn waiting_cost(rate_per_hour: Money, arrivals: &[Time], departure: Time) -> Exact {
    arrivals
        .iter()
        .map(|&a| {
            debug_assert!(departure >= a, "departure precedes an arrival");
            Exact::new(
                rate_per_hour.micros() as i128 * (departure - a).millis() as i128,
                MS_PER_HOUR as i128,
            )
        })
        .fold(Exact::zero(), |acc, x| acc + x)
}

/// Rounds to the nearest micro-dollar, ties to even.
pub fn round_half_even(x: Exact) -> Money {
    let floor = x.floor();
    let frac = x - floor;
    let half = Exact::new(1, 2);
    let mut out = *floor.numer() / *floor.denom();
    if frac > half || (frac == half && out % 2 != 0) {
        out += 1;
    }
    Money(out as i64)
}

/// Trucks of each fleet in a platoon that drive one edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMembership {
    pub edge: EdgeId,
    pub per_fleet: BTreeMap<FleetId, Vec<TruckId>>,
}

impl EdgeMembership {
    pub fn size(&self) -> usize {
        self.per_fleet.values().map(Vec::len).sum()
    }

    pub fn counts(&self) -> BTreeMap<FleetId, usize> {
        self.per_fleet.iter().map(|(&f, v)| (f, v.len())).collect()
    }
}

/// Per-edge membership over the union of the members' next segments.
pub fn edge_memberships(members: &[&Announcement]) -> Vec<EdgeMembership> {
    let mut by_edge: BTreeMap<EdgeId, BTreeMap<FleetId, Vec<TruckId>>> = BTreeMap::new();
    for a in members {
        for &e in &a.next_segment.edges {
            by_edge
                .entry(e)
                .or_default()
                .entry(a.fleet)
                .or_default()
                .push(a.truck);
        }
    }
    by_edge
        .into_iter()
        .map(|(edge, per_fleet)| EdgeMembership { edge, per_fleet })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlatoonProfit {
    pub per_fleet: BTreeMap<FleetId, Money>,
    pub total: Money,
}

/// Profit of each fleet taking part in a platoon departing at `departure`.
pub fn platoon_profit(
    members: &[&Announcement],
    departure: Time,
    params: &EconomicParams,
    net: &RoadNetwork,
) -> PlatoonProfit {
    let mut exact: BTreeMap<FleetId, Exact> =
        members.iter().map(|a| (a.fleet, Exact::zero())).collect();
    for m in edge_memberships(members) {
        let rho = params.edge_reward(net, m.edge);
        for (f, r) in edge_reward(rho, &m.counts()) {
            *exact.get_mut(&f).unwrap() += r;
        }
    }
    let rate = params.waiting_cost_rate();
    for (f, value) in exact.iter_mut() {
        let arrivals: Vec<Time> = members
            .iter()
            .filter(|a| a.fleet == *f)
            .map(|a| a.arrival)
            .collect();
        *value -= waiting_cost(rate, &arrivals, departure);
    }
    let per_fleet: BTreeMap<FleetId, Money> = exact
        .into_iter()
        .map(|(f, v)| (f, round_half_even(v)))
        .collect();
    let total = per_fleet.values().copied().sum();
    PlatoonProfit { per_fleet, total }
}

/// Fills in the profits of every candidate of a batch. A truck travelling
/// alone is not a platoon member, so it earns and pays nothing.
pub fn price_candidates(batch: &mut Batch, params: &EconomicParams, net: &RoadNetwork) {
    let anns = &batch.announcements;
    for c in &mut batch.candidates {
        if c.is_singleton() {
            c.per_fleet_profit = [(anns[c.members[0]].fleet, Money::ZERO)].into();
            c.total_profit = Money::ZERO;
            continue;
        }
        let members: Vec<&Announcement> = c.members.iter().map(|&v| &anns[v]).collect();
        let p = platoon_profit(&members, c.departure, params, net);
        c.per_fleet_profit = p.per_fleet;
        c.total_profit = p.total;
    }
}

#[cfg(test)]
pub(crate) fn is_nonnegative(x: &Exact) -> bool {
    *x >= Exact::zero()
}

/// Announcements of a candidate's members.
pub fn candidate_members<'a>(batch: &'a Batch, c: &CandidatePlatoon) -> Vec<&'a Announcement> {
    c.members.iter().map(|&v| &batch.announcements[v]).collect()
}
