"""Smoke test for the platoon Python extension."""

import json

import platoon


def main():
    net = platoon.Network.se33()
    assert net.hub_count == 33
    nodes, km = net.shortest_path(net.hubs()[0], net.hubs()[-1])
    assert nodes[0] == net.hubs()[0] and km > 0

    sc = platoon.Scenario.generate(100, seed=3)
    assert sc.truck_count == 100
    assert sum(sc.fleet_sizes().values()) == 100
    assert platoon.Scenario.from_json(sc.to_json()).to_json() == sc.to_json()

    results = {s: platoon.simulate(sc, s, audit=True) for s in ("single", "pareto", "sysmax")}
    for name, r in results.items():
        assert r.verify() == [], (name, r.verify())
        assert r.strategy == name
    fuel = {s: r.fuel_reduction() for s, r in results.items()}
    assert fuel["single"] <= fuel["pareto"] + 1e-9
    assert results["sysmax"].total_profit >= results["pareto"].total_profit - 1e-6
    gains = results["pareto"].gains_over(results["single"])
    assert set(gains) == set(sc.fleet_sizes())

    again = platoon.SimulationResult.from_json(results["pareto"].to_json())
    assert json.loads(again.to_json())["total_profit"] == json.loads(results["pareto"].to_json())["total_profit"]

    shares = platoon.edge_reward(2.0, {1: 2, 2: 1})
    assert abs(shares[1] - 8 / 3) < 1e-9 and abs(shares[2] - 4 / 3) < 1e-9
    assert abs(platoon.waiting_cost(20.0, [0.0, 0.5], 1.0) - 30.0) < 1e-9
    assert platoon.gain_pct(150.0, 100.0) == 50.0
    selected, objective = platoon.solve_cover(3, [[0], [1, 2], [0, 1, 2]], [0, 5, 3])
    assert (selected, objective) == ([0, 1], 5)

    print("smoke test ok:", {s: round(f, 2) for s, f in fuel.items()})


if __name__ == "__main__":
    main()
