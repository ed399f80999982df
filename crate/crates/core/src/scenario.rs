//! Trucks, fleets, economic parameters and seeded scenario generation.

use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{
    segment_path, travel_time, EdgeId, NetworkError, NodeId, Path, PathSegment, RoadNetwork,
};
use crate::units::{Duration, Money, Time};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TruckId(pub u32);

impl fmt::Display for TruckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "truck {}", self.0)
    }
}

/// Fleet number, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FleetId(pub u32);

impl fmt::Display for FleetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "fleet {}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("fleet shares must be non-negative and sum to 1 (got {0:?})")]
    BadShares(Vec<f64>),
    #[error("number of trucks must be positive")]
    NoTrucks,
    #[error("network has fewer than two hubs")]
    TooFewHubs,
    #[error("{truck}: {reason}")]
    BadTruck { truck: TruckId, reason: String },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Economic and coordination parameters shared by every truck and hub.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomicParams {
    /// Platooning reward per following truck per kilometer, in dollars.
    pub reward_per_follower_km: f64,
    /// Waiting cost in dollars per hour.
    pub waiting_cost_per_hour: f64,
    /// Fraction of fuel a following truck saves.
    pub fuel_saving_fraction: f64,
    pub trigger_margin_min: f64,
    pub waiting_budget_min: f64,
    pub max_batch_trucks: usize,
    pub max_batch_platoons: usize,
    pub speed_kmh: f64,
    pub start_window_h: f64,
}

impl Default for EconomicParams {
    fn default() -> Self {
        default_params()
    }
}

pub fn default_params() -> EconomicParams {
    EconomicParams {
        reward_per_follower_km: 5.25 / 100.0,
        waiting_cost_per_hour: 20.0,
        fuel_saving_fraction: 0.10,
        trigger_margin_min: 5.0,
        waiting_budget_min: 20.0,
        max_batch_trucks: 25,
        max_batch_platoons: 6000,
        speed_kmh: 80.0,
        start_window_h: 3.0,
    }
}

impl EconomicParams {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let positive = [
            ("reward_per_follower_km", self.reward_per_follower_km),
            ("speed_kmh", self.speed_kmh),
            ("start_window_h", self.start_window_h),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScenarioError::BadParam(format!("{name} must be positive")));
            }
        }
        let non_negative = [
            ("waiting_cost_per_hour", self.waiting_cost_per_hour),
            ("trigger_margin_min", self.trigger_margin_min),
            ("waiting_budget_min", self.waiting_budget_min),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ScenarioError::BadParam(format!("{name} must not be negative")));
            }
        }
        if !(self.fuel_saving_fraction > 0.0 && self.fuel_saving_fraction < 1.0) {
            return Err(ScenarioError::BadParam(
                "fuel_saving_fraction must lie in (0, 1)".into(),
            ));
        }
        if self.max_batch_trucks == 0 || self.max_batch_platoons == 0 {
            return Err(ScenarioError::BadParam("batch caps must be positive".into()));
        }
        Ok(())
    }

    /// Applies a `key=value` override, type-checked against the field.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self, ScenarioError> {
        let mut obj = serde_json::to_value(self)?;
        let map = obj.as_object_mut().unwrap();
        if !map.contains_key(key) {
            return Err(ScenarioError::BadParam(format!("unknown parameter `{key}`")));
        }
        let parsed: serde_json::Value = serde_json::from_str(value)
            .map_err(|_| ScenarioError::BadParam(format!("`{value}` is not a number")))?;
        map.insert(key.to_string(), parsed);
        let out: EconomicParams = serde_json::from_value(obj)
            .map_err(|e| ScenarioError::BadParam(format!("{key}: {e}")))?;
        out.validate()?;
        Ok(out)
    }

    pub fn trigger_margin(&self) -> Duration {
        Duration::from_minutes(self.trigger_margin_min)
    }

    pub fn waiting_budget(&self) -> Duration {
        Duration::from_minutes(self.waiting_budget_min)
    }

    pub fn start_window(&self) -> Duration {
        Duration::from_hours(self.start_window_h)
    }

    /// Reward per following truck on one edge, rounded to the micro-dollar.
    pub fn edge_reward(&self, net: &RoadNetwork, edge: EdgeId) -> Money {
        let km = net.edge(edge).length_m as f64 / 1000.0;
        Money::from_dollars(self.reward_per_follower_km * km)
    }

    /// Waiting cost rate in micro-dollars per hour.
    pub fn waiting_cost_rate(&self) -> Money {
        Money::from_dollars(self.waiting_cost_per_hour)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Truck {
    pub id: TruckId,
    pub fleet: FleetId,
    pub path: Path,
    pub segments: Vec<PathSegment>,
    pub start_time: Time,
    pub waiting_budget: Duration,
}

impl Truck {
    pub fn new(
        net: &RoadNetwork,
        id: TruckId,
        fleet: FleetId,
        path: Path,
        start_time: Time,
        waiting_budget: Duration,
    ) -> Result<Self, ScenarioError> {
        let bad = |reason: &str| ScenarioError::BadTruck {
            truck: id,
            reason: reason.to_string(),
        };
        if !net.is_hub(path.origin()) || !net.is_hub(path.destination()) {
            return Err(bad("origin and destination must be hubs"));
        }
        if waiting_budget < Duration::ZERO {
            return Err(bad("negative waiting budget"));
        }
        if fleet.0 == 0 {
            return Err(bad("fleet ids start at 1"));
        }
        let segments = segment_path(&path, net);
        Ok(Truck {
            id,
            fleet,
            path,
            segments,
            start_time,
            waiting_budget,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TruckRecord {
    id: TruckId,
    fleet: FleetId,
    path: Vec<NodeId>,
    start_time: Time,
    waiting_budget: Duration,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ScenarioFile {
    seed: u64,
    horizon: Duration,
    params: EconomicParams,
    network: RoadNetwork,
    trucks: Vec<TruckRecord>,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub trucks: Vec<Truck>,
    pub horizon: Duration,
    pub params: EconomicParams,
    pub seed: u64,
}

impl Scenario {
    /// Assembles a scenario from explicit trucks, checking ids are unique.
    pub fn new(
        network: RoadNetwork,
        trucks: Vec<Truck>,
        horizon: Duration,
        params: EconomicParams,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        params.validate()?;
        let mut ids: Vec<TruckId> = trucks.iter().map(|t| t.id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(ScenarioError::BadTruck {
                truck: w[0],
                reason: "duplicate truck id".into(),
            });
        }
        Ok(Scenario {
            network,
            trucks,
            horizon,
            params,
            seed,
        })
    }

    pub fn fleets(&self) -> Vec<FleetId> {
        let mut f: Vec<FleetId> = self.trucks.iter().map(|t| t.fleet).collect();
        f.sort();
        f.dedup();
        f
    }

    pub fn fleet_sizes(&self) -> Vec<(FleetId, usize)> {
        self.fleets()
            .into_iter()
            .map(|f| (f, self.trucks.iter().filter(|t| t.fleet == f).count()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ScenarioFile {
            seed: self.seed,
            horizon: self.horizon,
            params: self.params.clone(),
            network: self.network.clone(),
            trucks: self
                .trucks
                .iter()
                .map(|t| TruckRecord {
                    id: t.id,
                    fleet: t.fleet,
                    path: t.path.nodes().to_vec(),
                    start_time: t.start_time,
                    waiting_budget: t.waiting_budget,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(s)?;
        let trucks = file
            .trucks
            .into_iter()
            .map(|r| {
                let path = Path::from_nodes(&file.network, &r.path).map_err(|e| {
                    ScenarioError::BadTruck {
                        truck: r.id,
                        reason: e.to_string(),
                    }
                })?;
                Truck::new(
                    &file.network,
                    r.id,
                    r.fleet,
                    path,
                    r.start_time,
                    r.waiting_budget,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        Scenario::new(file.network, trucks, file.horizon, file.params, file.seed)
    }
}

/// Splits `n` items by `shares` with largest-remainder rounding; ties in the
/// remainder go to the lower fleet index.
pub fn fleet_sizes(n: usize, shares: &[f64]) -> Result<Vec<usize>, ScenarioError> {
    let sum: f64 = shares.iter().sum();
    if shares.is_empty() || shares.iter().any(|&s| !(s >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(ScenarioError::BadShares(shares.to_vec()));
    }
    let quotas: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    let frac = |i: usize| quotas[i] - sizes[i] as f64;
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    Ok(sizes)
}

/// Draws a random scenario: uniform distinct hub origin/destination pairs,
/// shortest-path routes, fleet labels shuffled over trucks and start times
/// uniform over `[0, start_window]`.
pub fn generate_scenario(
    net: &RoadNetwork,
    n_trucks: usize,
    fleet_shares: &[f64],
    start_window: Duration,
    seed: u64,
    params: EconomicParams,
) -> Result<Scenario, ScenarioError> {
    params.validate()?;
    if n_trucks == 0 {
        return Err(ScenarioError::NoTrucks);
    }
    let sizes = fleet_sizes(n_trucks, fleet_shares)?;
    let hubs = net.hubs();
    if hubs.len() < 2 {
        return Err(ScenarioError::TooFewHubs);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<FleetId> = sizes
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(FleetId(i as u32 + 1), k))
        .collect();
    labels.shuffle(&mut rng);

    let budget = params.waiting_budget();
    let mut longest_trip = Duration::ZERO;
    let mut trucks = Vec::with_capacity(n_trucks);
    for (i, fleet) in labels.into_iter().enumerate() {
        let path = loop {
            let o = *hubs.choose(&mut rng).unwrap();
            let d = *hubs.choose(&mut rng).unwrap();
            if o == d {
                continue;
            }
            match net.shortest_path(o, d) {
                Ok(p) => break p,
                Err(NetworkError::Unreachable(..)) => continue,
                Err(e) => return Err(e.into()),
            }
        };
        let start = Time(rng.gen_range(0..=start_window.millis()));
        longest_trip = longest_trip.max(travel_time(net, path.edges(), params.speed_kmh));
        trucks.push(Truck::new(
            net,
            TruckId(i as u32),
            fleet,
            path,
            start,
            budget,
        )?);
    }
    let horizon = start_window + longest_trip + budget;
    Scenario::new(net.clone(), trucks, horizon, params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHARES: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

    #[test]
    fn largest_remainder_sizes() {
        assert_eq!(fleet_sizes(10, &SHARES).unwrap(), vec![4, 3, 2, 1]);
        assert_eq!(fleet_sizes(2500, &SHARES).unwrap(), vec![1000, 750, 500, 250]);
        assert_eq!(fleet_sizes(500, &SHARES).unwrap(), vec![200, 150, 100, 50]);
        // 7 * (0.5, 0.25, 0.25) = (3.5, 1.75, 1.75): floors 3,1,1, two left over
        assert_eq!(fleet_sizes(7, &[0.5, 0.25, 0.25]).unwrap(), vec![3, 2, 2]);
        assert_eq!(fleet_sizes(1, &SHARES).unwrap(), vec![1, 0, 0, 0]);
    }

    #[test]
    fn bad_shares_rejected() {
        assert!(matches!(
            fleet_sizes(10, &[0.5, 0.4]),
            Err(ScenarioError::BadShares(_))
        ));
        assert!(matches!(
            fleet_sizes(10, &[1.2, -0.2]),
            Err(ScenarioError::BadShares(_))
        ));
        assert!(matches!(fleet_sizes(10, &[]), Err(ScenarioError::BadShares(_))));
    }

    #[test]
    fn defaults_match_reported_setup() {
        let p = default_params();
        assert_eq!(p.waiting_cost_rate(), Money::from_dollars(20.0));
        assert_eq!(p.max_batch_trucks, 25);
        assert_eq!(p.max_batch_platoons, 6000);
        assert_eq!(p.trigger_margin(), Duration::from_minutes(5.0));
        assert_eq!(p.waiting_budget(), Duration::from_minutes(20.0));
        assert_eq!(p.start_window(), Duration::from_hours(3.0));
        assert_eq!(Money::from_dollars(p.reward_per_follower_km * 100.0), Money(5_250_000));
        p.validate().unwrap();
    }

    #[test]
    fn overrides_are_type_checked() {
        let p = default_params();
        let q = p.with_override("waiting_cost_per_hour", "40").unwrap();
        assert_eq!(q.waiting_cost_per_hour, 40.0);
        let q = p.with_override("max_batch_trucks", "10").unwrap();
        assert_eq!(q.max_batch_trucks, 10);
        assert!(p.with_override("max_batch_trucks", "1.5").is_err());
        assert!(p.with_override("nope", "1").is_err());
        assert!(p.with_override("fuel_saving_fraction", "1.5").is_err());
        assert!(p.with_override("speed_kmh", "fast").is_err());
    }

    #[test]
    fn generation_is_seeded_and_well_formed() {
        let net = RoadNetwork::se33();
        let p = default_params();
        let a = generate_scenario(&net, 500, &SHARES, p.start_window(), 1, p.clone()).unwrap();
        let b = generate_scenario(&net, 500, &SHARES, p.start_window(), 1, p.clone()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_scenario(&net, 500, &SHARES, p.start_window(), 2, p.clone()).unwrap();
        assert_ne!(a.to_json(), c.to_json());

        let sizes: Vec<usize> = a.fleet_sizes().iter().map(|s| s.1).collect();
        assert_eq!(sizes, vec![200, 150, 100, 50]);
        for t in &a.trucks {
            assert_ne!(t.path.origin(), t.path.destination());
            assert!(t.start_time >= Time::ZERO && t.start_time <= Time::ZERO + p.start_window());
            assert_eq!(t.waiting_budget, p.waiting_budget());
            let joined: Vec<EdgeId> = t.segments.iter().flat_map(|s| s.edges.clone()).collect();
            assert_eq!(joined, t.path.edges());
        }
    }

    #[test]
    fn scenario_file_round_trip() {
        let net = RoadNetwork::se33();
        let p = default_params();
        let a = generate_scenario(&net, 40, &SHARES, p.start_window(), 9, p.clone()).unwrap();
        let b = Scenario::from_json(&a.to_json()).unwrap();
        assert_eq!(a.trucks, b.trucks);
        assert_eq!(a.params, b.params);
        assert_eq!(a.to_json(), b.to_json());
    }
}
