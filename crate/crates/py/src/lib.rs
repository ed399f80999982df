//! Python bindings for the platooning library.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use platoon_core::cover::CoverProblem;
use platoon_core::metrics::{fleet_reports, fuel_reduction, profit_gain, FleetReport};
use platoon_core::network::{NodeId, RoadNetwork};
use platoon_core::profit::{self, Exact};
use platoon_core::scenario::{default_params, generate_scenario, EconomicParams, FleetId};
use platoon_core::sim::{self, SimConfig, SimulationResult, SingletonRule};
use platoon_core::strategies::StrategyKind;
use platoon_core::units::{Money, Time};
use platoon_core::verify::verify;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn exact_dollars(x: &Exact) -> f64 {
    *x.numer() as f64 / *x.denom() as f64 / 1e6
}

fn apply_params(overrides: Option<BTreeMap<String, String>>) -> Result<EconomicParams, String> {
    let mut p = default_params();
    for (k, v) in overrides.unwrap_or_default() {
        p = p.with_override(&k, &v).map_err(|e| e.to_string())?;
    }
    Ok(p)
}

/// A road network of hubs and junctions.
#[pyclass(name = "Network", module = "platoon")]
pub struct PyNetwork {
    inner: RoadNetwork,
}

#[pymethods]
impl PyNetwork {
    /// The bundled 33-hub network.
    #[staticmethod]
    fn se33() -> Self {
        PyNetwork {
            inner: RoadNetwork::se33(),
        }
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = RoadNetwork::from_json(text).map_err(value_error)?;
        Ok(PyNetwork { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn hub_count(&self) -> usize {
        self.inner.hub_count()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn hubs(&self) -> Vec<u32> {
        self.inner.hubs().into_iter().map(|n| n.0).collect()
    }

    /// Node sequence and length in km of the shortest path.
    fn shortest_path(&self, origin: u32, destination: u32) -> PyResult<(Vec<u32>, f64)> {
        let p = self
            .inner
            .shortest_path(NodeId(origin), NodeId(destination))
            .map_err(value_error)?;
        let km = p.length_m(&self.inner) as f64 / 1000.0;
        Ok((p.nodes().iter().map(|n| n.0).collect(), km))
    }
}

/// Trucks with paths, start times and waiting budgets on a network.
#[pyclass(name = "Scenario", module = "platoon")]
pub struct PyScenario {
    inner: platoon_core::scenario::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Random scenario; `params` maps parameter names to values.
    #[staticmethod]
    #[pyo3(signature = (trucks, seed, shares = vec![0.4, 0.3, 0.2, 0.1], network = None, params = None))]
    fn generate(
        trucks: usize,
        seed: u64,
        shares: Vec<f64>,
        network: Option<PyRef<'_, PyNetwork>>,
        params: Option<BTreeMap<String, String>>,
    ) -> PyResult<Self> {
        let net = network.map_or_else(RoadNetwork::se33, |n| n.inner.clone());
        let p = apply_params(params).map_err(PyValueError::new_err)?;
        let inner = generate_scenario(&net, trucks, &shares, p.start_window(), seed, p)
            .map_err(value_error)?;
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = platoon_core::scenario::Scenario::from_json(text).map_err(value_error)?;
        Ok(PyScenario { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn truck_count(&self) -> usize {
        self.inner.trucks.len()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn fleet_sizes(&self) -> BTreeMap<u32, usize> {
        self.inner
            .fleet_sizes()
            .into_iter()
            .map(|(f, n)| (f.0, n))
            .collect()
    }
}

/// Outcome of one simulation run.
#[pyclass(name = "SimulationResult", module = "platoon")]
pub struct PyResult_ {
    inner: SimulationResult,
}

#[pymethods]
impl PyResult_ {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = SimulationResult::from_json(text).map_err(value_error)?;
        Ok(PyResult_ { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.short_name()
    }

    #[getter]
    fn total_profit(&self) -> f64 {
        self.inner.total_profit.as_dollars()
    }

    #[getter]
    fn instance_count(&self) -> usize {
        self.inner.instance_count()
    }

    #[getter]
    fn platoon_count(&self) -> usize {
        self.inner.platoons.len()
    }

    fn fleet_profit(&self) -> BTreeMap<u32, f64> {
        self.inner
            .fleet_profit
            .iter()
            .map(|(f, m)| (f.0, m.as_dollars()))
            .collect()
    }

    /// Fuel saved across all trucks, in percent.
    fn fuel_reduction(&self) -> f64 {
        fuel_reduction(&self.inner, self.inner.params.fuel_saving_fraction)
    }

    /// Per-fleet profit gain in percent over a single-fleet run; `None`
    /// where the single-fleet profit is not positive.
    fn gains_over(&self, single: PyRef<'_, PyResult_>) -> BTreeMap<u32, Option<f64>> {
        fleet_reports(&self.inner, Some(&single.inner))
            .into_iter()
            .map(|r| (r.fleet.0, r.gain_pct))
            .collect()
    }

    /// Invariant violations, each as `name: detail`; empty when sound.
    fn verify(&self) -> Vec<String> {
        verify(&self.inner).iter().map(|v| v.to_string()).collect()
    }

    fn solve_times(&self) -> Vec<f64> {
        self.inner.instances().map(|i| i.solve_time_s).collect()
    }
}

fn parse_strategy(s: &str) -> PyResult<StrategyKind> {
    s.parse().map_err(PyValueError::new_err)
}

/// Runs a scenario under one strategy: "single", "pareto" or "sysmax".
#[pyfunction]
#[pyo3(signature = (scenario, strategy, audit = false, singleton_rule = "wait"))]
fn simulate(
    py: Python<'_>,
    scenario: PyRef<'_, PyScenario>,
    strategy: &str,
    audit: bool,
    singleton_rule: &str,
) -> PyResult<PyResult_> {
    let mut config = SimConfig::new(parse_strategy(strategy)?).with_audit(audit);
    config.singleton_rule = match singleton_rule {
        "wait" => SingletonRule::WaitForLaterBatches,
        "depart" => SingletonRule::DepartAtArrival,
        other => return Err(PyValueError::new_err(format!("unknown singleton rule `{other}`"))),
    };
    let sc = scenario.inner.clone();
    let inner = py
        .detach(move || sim::run(&sc, config))
        .map_err(value_error)?;
    Ok(PyResult_ { inner })
}

/// Per-fleet reward in dollars of one shared edge worth `rho` dollars per
/// follower, given the number of trucks of each fleet on it.
#[pyfunction]
fn edge_reward(rho: f64, counts: BTreeMap<u32, usize>) -> BTreeMap<u32, f64> {
    let counts: BTreeMap<FleetId, usize> = counts.into_iter().map(|(f, c)| (FleetId(f), c)).collect();
    profit::edge_reward(Money::from_dollars(rho), &counts)
        .iter()
        .map(|(f, x)| (f.0, exact_dollars(x)))
        .collect()
}

/// Waiting cost in dollars of trucks arriving at `arrivals_h` (hours) and
/// leaving together at `departure_h`, at `rate` dollars per hour.
#[pyfunction]
fn waiting_cost(rate: f64, arrivals_h: Vec<f64>, departure_h: f64) -> f64 {
    let arrivals: Vec<Time> = arrivals_h.into_iter().map(Time::from_hours).collect();
    let c = profit::waiting_cost(Money::from_dollars(rate), &arrivals, Time::from_hours(departure_h));
    exact_dollars(&c)
}

/// Percentage gain of `cross` over `single` dollars.
#[pyfunction]
fn gain_pct(cross: f64, single: f64) -> PyResult<f64> {
    let report = |d: f64| FleetReport {
        fleet: FleetId(1),
        profit: Money::from_dollars(d),
        gain_pct: None,
        follower_km: 0.0,
        truck_km: 0.0,
    };
    profit_gain(&report(cross), &report(single)).map_err(value_error)
}

/// Exact weighted set partitioning: picks candidates (lists of element
/// indices) covering every element once, maximizing total weight, subject
/// to each side constraint `(weights, lower_bound)`. Returns the selected
/// candidate indices and the objective.
#[pyfunction]
#[pyo3(signature = (n_elements, candidates, weights, side = vec![]))]
fn solve_cover(
    py: Python<'_>,
    n_elements: usize,
    candidates: Vec<Vec<usize>>,
    weights: Vec<i64>,
    side: Vec<(Vec<i64>, i64)>,
) -> PyResult<(Vec<usize>, i64)> {
    let problem = build_cover(n_elements, &candidates, weights, side).map_err(PyValueError::new_err)?;
    let sol = py.detach(move || problem.solve()).map_err(value_error)?;
    Ok((sol.selected, sol.objective))
}

fn build_cover(
    n_elements: usize,
    candidates: &[Vec<usize>],
    weights: Vec<i64>,
    side: Vec<(Vec<i64>, i64)>,
) -> Result<CoverProblem, String> {
    if n_elements > 64 {
        return Err("at most 64 elements".into());
    }
    let masks = candidates
        .iter()
        .map(|c| {
            c.iter().try_fold(0u64, |m, &e| {
                if e < n_elements {
                    Ok(m | 1 << e)
                } else {
                    Err(format!("element {e} out of range"))
                }
            })
        })
        .collect::<Result<Vec<u64>, String>>()?;
    let mut problem = CoverProblem::new(n_elements, masks, weights);
    for (w, lb) in side {
        problem = problem.with_side(w, lb);
    }
    Ok(problem)
}

#[pymodule]
fn platoon(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyResult_>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(edge_reward, m)?)?;
    m.add_function(wrap_pyfunction!(waiting_cost, m)?)?;
    m.add_function(wrap_pyfunction!(gain_pct, m)?)?;
    m.add_function(wrap_pyfunction!(solve_cover, m)?)?;
    Ok(())
}
