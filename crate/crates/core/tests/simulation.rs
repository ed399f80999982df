use proptest::prelude::*;

use platoon_core::network::{NetworkBuilder, RoadNetwork};
use platoon_core::scenario::{default_params, generate_scenario, Scenario};
use platoon_core::sim::{run, SimConfig, SingletonRule};
use platoon_core::strategies::StrategyKind;
use platoon_core::units::Duration;
use platoon_core::verify::verify;

/// Five hubs joined through two junctions, so segments span several edges.
fn small_net() -> RoadNetwork {
    NetworkBuilder::default()
        .hub(0)
        .hub(1)
        .hub(2)
        .hub(3)
        .hub(4)
        .junction(10)
        .junction(11)
        .two_way(0, 10, 30.0)
        .two_way(1, 10, 25.0)
        .two_way(10, 11, 60.0)
        .two_way(11, 2, 20.0)
        .two_way(11, 3, 45.0)
        .two_way(3, 4, 50.0)
        .two_way(2, 4, 70.0)
        .build()
        .unwrap()
}

fn small_scenario(trucks: usize, seed: u64, budget_min: f64, window_h: f64) -> Scenario {
    let mut p = default_params();
    p.waiting_budget_min = budget_min;
    generate_scenario(
        &small_net(),
        trucks,
        &[0.5, 0.3, 0.2],
        Duration::from_hours(window_h),
        seed,
        p,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_run_satisfies_the_invariants(
        trucks in 1usize..60,
        seed in any::<u64>(),
        budget in 0.0f64..40.0,
        window in 0.1f64..2.0,
        depart_rule in any::<bool>(),
    ) {
        let sc = small_scenario(trucks, seed, budget, window);
        for s in StrategyKind::ALL {
            let mut cfg = SimConfig::new(s).with_audit(true);
            if depart_rule {
                cfg.singleton_rule = SingletonRule::DepartAtArrival;
            }
            let r = run(&sc, cfg).unwrap();
            let v = verify(&r);
            prop_assert!(v.is_empty(), "{s}: {:?}", v);
            for it in &r.itineraries {
                prop_assert!(it.total_wait <= it.waiting_budget);
            }
        }
    }

    #[test]
    fn runs_are_deterministic(trucks in 1usize..40, seed in any::<u64>()) {
        let sc = small_scenario(trucks, seed, 20.0, 0.5);
        for s in StrategyKind::ALL {
            let a = run(&sc, SimConfig::new(s)).unwrap().without_timing();
            let b = run(&sc, SimConfig::new(s)).unwrap().without_timing();
            prop_assert_eq!(a.to_json(), b.to_json());
        }
    }
}

#[test]
fn zero_budget_means_no_waiting_and_no_platoons_after_origin() {
    let sc = small_scenario(40, 9, 0.0, 0.2);
    for s in StrategyKind::ALL {
        let r = run(&sc, SimConfig::new(s)).unwrap();
        assert!(r.itineraries.iter().all(|i| i.total_wait == Duration::ZERO));
        assert!(verify(&r).is_empty());
    }
}

#[test]
fn scenario_file_round_trip_gives_same_result() {
    let sc = small_scenario(30, 4, 20.0, 0.5);
    let back = Scenario::from_json(&sc.to_json()).unwrap();
    let a = run(&sc, SimConfig::new(StrategyKind::ParetoCrossFleet)).unwrap();
    let b = run(&back, SimConfig::new(StrategyKind::ParetoCrossFleet)).unwrap();
    assert_eq!(a.without_timing(), b.without_timing());
}
