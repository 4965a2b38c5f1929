mod common;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use routesim_core::graph::{dijkstra, Dist};
use routesim_core::linkstate::{LinkStateEngine, LsFlavorConfig, Lsdb, Lsp};
use routesim_core::sim::Walk;
use routesim_core::{InterfaceId, NodeId, Protocol, SimOptions, SimTime, Simulation};

fn lsp(origin: u32, seq: u64) -> Lsp {
    Lsp {
        origin: n(origin),
        seq,
        links: vec![],
        stubs: vec![],
        age_created: Default::default(),
    }
}

/// Floods `lsp` from router 0 around a 4-ring and returns (transmissions,
/// acceptances per router).
fn flood_ring(dbs: &mut [Lsdb], lsp: &Lsp) -> (usize, Vec<usize>) {
    // Interface 0 faces i+1, interface 1 faces i-1.
    let peer = |r: usize, i: InterfaceId| -> (usize, InterfaceId) {
        if i.0 == 0 {
            ((r + 1) % 4, InterfaceId(1))
        } else {
            ((r + 3) % 4, InterfaceId(0))
        }
    };
    let ifaces = [InterfaceId(0), InterfaceId(1)];
    let mut accepted = vec![0; 4];
    let mut sent = 0;
    let mut queue = VecDeque::new();
    let out = dbs[0].flood(lsp, None, &ifaces);
    if out.accepted {
        accepted[0] += 1;
    }
    for i in out.forward_on {
        queue.push_back(peer(0, i));
    }
    while let Some((r, in_if)) = queue.pop_front() {
        sent += 1;
        let out = dbs[r].flood(lsp, Some(in_if), &ifaces);
        if out.accepted {
            accepted[r] += 1;
        }
        for i in out.forward_on {
            queue.push_back(peer(r, i));
        }
    }
    (sent, accepted)
}

#[test]
fn ring_flood_reaches_everyone_once() {
    let mut dbs = vec![Lsdb::new(); 4];
    let (sent, accepted) = flood_ring(&mut dbs, &lsp(0, 1));
    assert_eq!(accepted, vec![1, 1, 1, 1]);
    // Two copies leave the origin, each neighbour relays one, and the far
    // router relays the first copy it gets; the last two copies die.
    assert_eq!(sent, 5);
    for db in &dbs {
        assert_eq!(db.get(n(0)).unwrap().seq, 1);
    }

    // A replay of the same sequence number goes nowhere.
    let (sent, accepted) = flood_ring(&mut dbs, &lsp(0, 1));
    assert_eq!((sent, accepted), (0, vec![0; 4]));

    // A newer one replaces the old one everywhere.
    let (_, accepted) = flood_ring(&mut dbs, &lsp(0, 2));
    assert_eq!(accepted, vec![1, 1, 1, 1]);
    assert!(dbs.iter().all(|db| db.get(n(0)).unwrap().seq == 2));
}

#[test]
fn converged_views_agree_and_match_dijkstra() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..20 {
        let proto = if trial % 2 == 0 { Protocol::Ospf } else { Protocol::Isis };
        let s = random_router_scenario(&mut rng, 3 + trial % 5, trial % 4, proto);
        let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
        sim.run();
        let routers: Vec<NodeId> = s.router_ids().collect();
        let db = |r: NodeId| {
            sim.engine(r)
                .unwrap()
                .as_any()
                .downcast_ref::<LinkStateEngine>()
                .unwrap()
                .lsdb()
                .clone()
        };
        let reference = db(routers[0]);
        assert_eq!(reference.len(), routers.len());
        for &r in &routers {
            assert_eq!(db(r), reference, "trial {trial} router {r}");
        }
        let cfg = if proto == Protocol::Ospf {
            LsFlavorConfig::ospf()
        } else {
            LsFlavorConfig::isis()
        };
        let g = routed_graph(&s, &[], |l| cfg.link_cost(l.bandwidth_bps) as i64);
        for &r in &routers {
            let truth = dijkstra(&g, r).unwrap();
            let table = sim.forwarding(r).unwrap();
            for h in s.host_ids() {
                let Dist::Finite(d) = truth.dist(h) else {
                    panic!("host unreachable in a connected topology")
                };
                assert_eq!(table.get(h).unwrap().metric, d as u64, "trial {trial}");
                match sim.walk(r, h) {
                    Walk::Reached(steps) => assert!(steps <= routers.len()),
                    other => panic!("trial {trial}: {other:?}"),
                }
            }
        }
    }
}

#[test]
fn link_cost_follows_bandwidth() {
    // Costs are per outgoing interface: 100 Mbit/s is 1, 10 Mbit/s is 10.
    let cfg = LsFlavorConfig::ospf();
    assert_eq!(cfg.link_cost(100_000_000), 1);
    assert_eq!(cfg.link_cost(10_000_000), 10);
    assert_eq!(cfg.link_cost(1_000_000_000), 1);
}

#[test]
fn every_single_link_failure_on_bundled_topologies() {
    for base in routesim_core::reference::reference_scenarios() {
        for proto in [Protocol::Ospf, Protocol::Isis] {
            for (i, s) in single_failure_variants(&base.with_protocol(proto), 100, 250) {
                let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
                let routers: Vec<NodeId> = s.router_ids().collect();
                let check = |sim: &Simulation, down: &[usize]| {
                    for &r in &routers {
                        for h in s.host_ids() {
                            let w = sim.walk(r, h);
                            if physically_reachable(&s, down, r, h) {
                                assert!(
                                    matches!(w, Walk::Reached(k) if k <= routers.len()),
                                    "{} {proto} link {i}: {r}->{h} {w:?}",
                                    s.name
                                );
                            } else {
                                // A cut behind a switch is invisible to routing.
                                assert!(!matches!(w, Walk::Loop(_)), "{w:?}");
                            }
                        }
                    }
                };
                sim.run_until(SimTime::from_secs(99));
                check(&sim, &[]);
                sim.run();
                check(&sim, &[i]);
            }
        }
    }
}
