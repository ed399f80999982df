//! Aggregates of simulation results: fleet profits and gains, fuel
//! reduction, and solver-time statistics, with CSV and JSON output.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::FleetId;
use crate::sim::{InstanceRecord, SimulationResult};
use crate::strategies::StrategyKind;
use crate::units::Money;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gain undefined for a single-fleet profit of {single}; absolute difference {difference}")]
    UndefinedGain { single: Money, difference: Money },
    #[error("no coordination instances to summarize")]
    NoInstances,
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FleetReport {
    pub fleet: FleetId,
    pub profit: Money,
    /// Percentage gain over the single-fleet run, when that run earned a
    /// positive profit.
    pub gain_pct: Option<f64>,
    pub follower_km: f64,
    pub truck_km: f64,
}

/// Percentage of fuel saved across all trucks, given that each follower
/// saves `fuel_saving_fraction` of its fuel on every edge it follows.
pub fn fuel_reduction(result: &SimulationResult, fuel_saving_fraction: f64) -> f64 {
    let follower_m: u64 = result.platoons.iter().map(|p| p.follower_m()).sum();
    let truck_m: u64 = result.itineraries.iter().map(|i| i.path_m).sum();
    if truck_m == 0 {
        return 0.0;
    }
    100.0 * fuel_saving_fraction * follower_m as f64 / truck_m as f64
}

pub fn profit_gain(cross: &FleetReport, single: &FleetReport) -> Result<f64, MetricsError> {
    if single.profit <= Money::ZERO {
        return Err(MetricsError::UndefinedGain {
            single: single.profit,
            difference: cross.profit - single.profit,
        });
    }
    let diff = (cross.profit - single.profit).micros() as f64;
    Ok(100.0 * diff / single.profit.micros() as f64)
}

/// Per-fleet reports of `result`. Follower distance on an edge is shared
/// among fleets in proportion to their trucks on it, as the reward is.
pub fn fleet_reports(result: &SimulationResult, single: Option<&SimulationResult>) -> Vec<FleetReport> {
    let mut follower_m: BTreeMap<FleetId, Ratio<u128>> = BTreeMap::new();
    for p in &result.platoons {
        for e in &p.edges {
            let n = e.members as u128;
            for (f, &m) in &e.per_fleet {
                *follower_m.entry(*f).or_default() +=
                    Ratio::new(m as u128 * (n - 1) * e.length_m as u128, n);
            }
        }
    }
    let mut truck_m: BTreeMap<FleetId, u64> = BTreeMap::new();
    for it in &result.itineraries {
        *truck_m.entry(it.fleet).or_default() += it.path_m;
    }
    let km = |m: f64| m / 1000.0;
    let reports: Vec<FleetReport> = result
        .fleets
        .iter()
        .map(|&f| FleetReport {
            fleet: f,
            profit: result.fleet_profit(f),
            gain_pct: None,
            follower_km: follower_m
                .get(&f)
                .map_or(0.0, |r| km(*r.numer() as f64 / *r.denom() as f64)),
            truck_km: km(truck_m.get(&f).copied().unwrap_or(0) as f64),
        })
        .collect();
    let Some(single) = single else {
        return reports;
    };
    let base = fleet_reports(single, None);
    reports
        .into_iter()
        .map(|mut r| {
            if let Some(b) = base.iter().find(|b| b.fleet == r.fleet) {
                r.gain_pct = profit_gain(&r, b).ok();
            }
            r
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolvePoint {
    pub instance: usize,
    pub batch_size: usize,
    pub candidates: usize,
    pub solve_time_s: f64,
    pub over_margin: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTimeStats {
    pub count: usize,
    pub max_s: f64,
    pub mean_s: f64,
    pub over_margin: usize,
    pub points: Vec<SolvePoint>,
}

impl SolveTimeStats {
    /// Share of instances solved in at most `limit_s` seconds.
    pub fn fraction_within(&self, limit_s: f64) -> f64 {
        let n = self.points.iter().filter(|p| p.solve_time_s <= limit_s).count();
        n as f64 / self.count as f64
    }
}

/// Solve-time summary; instances slower than `margin_s` are flagged.
pub fn solve_time_stats<'a>(
    instances: impl IntoIterator<Item = &'a InstanceRecord>,
    margin_s: f64,
) -> Result<SolveTimeStats, MetricsError> {
    let points: Vec<SolvePoint> = instances
        .into_iter()
        .map(|i| SolvePoint {
            instance: i.id,
            batch_size: i.batch.len(),
            candidates: i.candidate_count,
            solve_time_s: i.solve_time_s,
            over_margin: i.solve_time_s > margin_s,
        })
        .collect();
    if points.is_empty() {
        return Err(MetricsError::NoInstances);
    }
    let count = points.len();
    let max_s = points.iter().map(|p| p.solve_time_s).fold(0.0, f64::max);
    let mean_s = points.iter().map(|p| p.solve_time_s).sum::<f64>() / count as f64;
    let over_margin = points.iter().filter(|p| p.over_margin).count();
    Ok(SolveTimeStats {
        count,
        max_s,
        mean_s,
        over_margin,
        points,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    pub scenario: String,
    pub strategy: StrategyKind,
    pub total_profit: Money,
    pub fuel_reduction_pct: f64,
    pub fleets: Vec<FleetReport>,
    pub instance_count: usize,
    pub solve_times_s: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub candidate_counts: Vec<usize>,
}

/// Reports for a set of runs of one scenario; gains are taken against the
/// single-fleet run when it is among them.
pub fn system_reports(scenario: &str, results: &[SimulationResult]) -> Vec<SystemReport> {
    let single = results
        .iter()
        .find(|r| r.strategy == StrategyKind::SingleFleet);
    results
        .iter()
        .map(|r| SystemReport {
            scenario: scenario.to_string(),
            strategy: r.strategy,
            total_profit: r.total_profit,
            fuel_reduction_pct: fuel_reduction(r, r.params.fuel_saving_fraction),
            fleets: fleet_reports(r, single),
            instance_count: r.instance_count(),
            solve_times_s: r.instances().map(|i| i.solve_time_s).collect(),
            batch_sizes: r.instances().map(|i| i.batch.len()).collect(),
            candidate_counts: r.instances().map(|i| i.candidate_count).collect(),
        })
        .collect()
}

#[derive(Serialize)]
struct FleetRow<'a> {
    scenario: &'a str,
    strategy: StrategyKind,
    fleet: FleetId,
    profit: String,
    gain_pct: Option<String>,
}

#[derive(Serialize)]
struct FuelRow<'a> {
    scenario: &'a str,
    strategy: StrategyKind,
    fuel_reduction_pct: String,
    total_profit: String,
    instances: usize,
}

#[derive(Serialize)]
struct SolveRow<'a> {
    scenario: &'a str,
    strategy: StrategyKind,
    instance: usize,
    batch_size: usize,
    candidates: usize,
    solve_time_s: f64,
}

fn dollars(m: Money) -> String {
    format!("{:.2}", m.as_dollars())
}

/// Writes `fleet_profits.csv`, `fuel.csv`, `solvetimes.csv` and
/// `report.json` into `dir`.
pub fn write_reports(dir: &Path, reports: &[SystemReport]) -> Result<(), MetricsError> {
    fs::create_dir_all(dir)?;
    let mut fleets = csv::Writer::from_path(dir.join("fleet_profits.csv"))?;
    let mut fuel = csv::Writer::from_path(dir.join("fuel.csv"))?;
    let mut solves = csv::Writer::from_path(dir.join("solvetimes.csv"))?;
    for r in reports {
        for f in &r.fleets {
            fleets.serialize(FleetRow {
                scenario: &r.scenario,
                strategy: r.strategy,
                fleet: f.fleet,
                profit: dollars(f.profit),
                gain_pct: f.gain_pct.map(|g| format!("{g:.2}")),
            })?;
        }
        fuel.serialize(FuelRow {
            scenario: &r.scenario,
            strategy: r.strategy,
            fuel_reduction_pct: format!("{:.4}", r.fuel_reduction_pct),
            total_profit: dollars(r.total_profit),
            instances: r.instance_count,
        })?;
        for (i, t) in r.solve_times_s.iter().enumerate() {
            solves.serialize(SolveRow {
                scenario: &r.scenario,
                strategy: r.strategy,
                instance: i,
                batch_size: r.batch_sizes[i],
                candidates: r.candidate_counts[i],
                solve_time_s: *t,
            })?;
        }
    }
    fleets.flush()?;
    fuel.flush()?;
    solves.flush()?;
    let json = serde_json::to_string_pretty(reports).expect("reports serialize");
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}
