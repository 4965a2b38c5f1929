mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use routesim_core::eigrp::{DualState, EigrpConfig, EigrpEngine};
use routesim_core::graph::{dijkstra, Dist};
use routesim_core::scenario::Scenario;
use routesim_core::sim::Walk;
use routesim_core::{NodeId, Protocol, SimOptions, SimTime, Simulation};

fn eigrp_engine(sim: &Simulation, r: NodeId) -> &EigrpEngine {
    sim.engine(r)
        .unwrap()
        .as_any()
        .downcast_ref::<EigrpEngine>()
        .unwrap()
}

fn assert_matches_dijkstra(sim: &Simulation, s: &Scenario, down: &[usize], ctx: &str) {
    let cfg = EigrpConfig::default();
    let g = routed_graph(s, down, |l| {
        cfg.link_metric(l.bandwidth_bps, l.prop_delay_us).unwrap() as i64
    });
    for r in s.router_ids() {
        let truth = dijkstra(&g, r).unwrap();
        for h in s.host_ids() {
            let got = sim.forwarding(r).unwrap().get(h).map(|x| x.metric);
            let want = match truth.dist(h) {
                Dist::Finite(d) => Some(d as u64),
                Dist::Unreachable => None,
            };
            assert_eq!(got, want, "{ctx}: {r}->{h}");
        }
    }
}

/// No successor chain toward any host closes on itself.
fn assert_loop_free(sim: &Simulation, s: &Scenario, ctx: &str) {
    for r in s.router_ids() {
        for h in s.host_ids() {
            if let Walk::Loop(c) = sim.walk(r, h) {
                panic!("{ctx} t={:?}: loop toward {h}: {c:?}", sim.now());
            }
        }
    }
}

#[test]
fn converged_distances_match_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..25 {
        let s = random_router_scenario(&mut rng, 2 + trial % 7, trial % 5, Protocol::Eigrp);
        let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
        sim.run();
        assert_matches_dijkstra(&sim, &s, &[], &format!("trial {trial}"));
        for r in s.router_ids() {
            assert!(!eigrp_engine(&sim, r).is_active());
        }
    }
}

#[test]
fn successor_graph_stays_acyclic_through_random_failures() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..25 {
        let base = random_router_scenario(&mut rng, 3 + trial % 6, 1 + trial % 4, Protocol::Eigrp);
        let router_links: Vec<usize> = (0..base.links.len())
            .filter(|&i| base.kind(base.links[i].b) != routesim_core::scenario::NodeKind::Host)
            .collect();
        let pick = router_links[rng.gen_range(0..router_links.len())];
        let (_, s) = single_failure_variants(&base, 60, 120).swap_remove(pick);
        let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
        sim.run_until(SimTime::from_secs(59));
        let ctx = format!("trial {trial} link {pick}");
        while sim.step() {
            assert_loop_free(&sim, &s, &ctx);
        }
        assert_matches_dijkstra(&sim, &s, &[pick], &ctx);
    }
}

#[test]
fn every_single_link_failure_on_bundled_topologies() {
    for base in routesim_core::reference::reference_scenarios() {
        let base = base.with_protocol(Protocol::Eigrp);
        for (i, s) in single_failure_variants(&base, 100, 250) {
            let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
            sim.run_until(SimTime::from_secs(99));
            let ctx = format!("{} link {i}", s.name);
            while sim.step() {
                assert_loop_free(&sim, &s, &ctx);
            }
            for r in s.router_ids() {
                let e = eigrp_engine(&sim, r);
                assert!(e.topology().values().all(|t| t.state == DualState::Passive));
                for h in s.host_ids() {
                    if physically_reachable(&s, &[i], r, h) {
                        assert!(matches!(sim.walk(r, h), Walk::Reached(_)), "{ctx}: {r}->{h}");
                    }
                }
            }
        }
    }
}

#[test]
fn feasible_distance_bounds_distance_when_passive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = random_router_scenario(&mut rng, 6, 4, Protocol::Eigrp);
    for (i, s) in single_failure_variants(&base, 40, 90) {
        let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
        while sim.step() {
            for r in s.router_ids() {
                for t in eigrp_engine(&sim, r).topology().values() {
                    if t.state == DualState::Passive {
                        let inf = u64::MAX;
                        let fd = t.feasible_distance.unwrap_or(inf);
                        assert!(fd <= t.distance.unwrap_or(inf), "link {i}");
                    } else {
                        assert!(!t.outstanding_replies.is_empty(), "link {i}");
                    }
                }
            }
        }
    }
}
