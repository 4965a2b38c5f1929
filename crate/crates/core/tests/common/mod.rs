//! Independent oracles and harnesses shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;

use routesim_core::graph::{Cost, Dist, Graph};
use routesim_core::rip::{RipConfig, RipRouteEntry, RipTable, INFINITY};
use routesim_core::scenario::{FailureSpec, LinkSpec, LinkStatus, NodeKind, NodeSpec, Scenario};
use routesim_core::{InterfaceId, NodeId, Protocol};

pub fn n(i: u32) -> NodeId {
    NodeId(i)
}

/// Random digraph on `nodes` nodes; each ordered pair (self loops
/// included) gets an edge with probability `density`.
pub fn random_digraph(rng: &mut impl Rng, nodes: u32, weights: &[Cost], density: f64) -> Graph {
    let mut g = Graph::new();
    for i in 0..nodes {
        g.add_node(n(i));
    }
    for a in 0..nodes {
        for b in 0..nodes {
            if rng.gen_bool(density) {
                let w = weights[rng.gen_range(0..weights.len())];
                g.add_edge(n(a), n(b), w).unwrap();
            }
        }
    }
    g
}

pub fn complete_digraph(nodes: u32, weight: impl Fn(u32, u32) -> Cost) -> Graph {
    let mut g = Graph::new();
    for i in 0..nodes {
        g.add_node(n(i));
    }
    for a in 0..nodes {
        for b in 0..nodes {
            if a != b {
                g.add_edge(n(a), n(b), weight(a, b)).unwrap();
            }
        }
    }
    g
}

/// Shortest distances by enumerating every simple path from `source`.
/// Valid whenever no negative cycle is reachable.
pub fn brute_force_distances(g: &Graph, source: NodeId) -> BTreeMap<NodeId, Dist> {
    let mut best: BTreeMap<NodeId, Dist> = g.nodes().map(|v| (v, Dist::Unreachable)).collect();
    let mut on_path = vec![source];
    fn dfs(
        g: &Graph,
        at: NodeId,
        cost: Cost,
        on_path: &mut Vec<NodeId>,
        best: &mut BTreeMap<NodeId, Dist>,
    ) {
        let d = Dist::Finite(cost);
        if d < best[&at] {
            best.insert(at, d);
        }
        for &(v, w) in g.out_edges(at) {
            if !on_path.contains(&v) {
                on_path.push(v);
                dfs(g, v, cost + w, on_path, best);
                on_path.pop();
            }
        }
    }
    dfs(g, source, 0, &mut on_path, &mut best);
    best
}

/// Every simple directed cycle, as node sequences starting at their
/// smallest node.
pub fn simple_cycles(g: &Graph) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    for start in g.nodes() {
        let mut path = vec![start];
        fn dfs(g: &Graph, start: NodeId, path: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
            let at = *path.last().unwrap();
            for &(v, _) in g.out_edges(at) {
                if v == start {
                    out.push(path.clone());
                } else if v > start && !path.contains(&v) {
                    path.push(v);
                    dfs(g, start, path, out);
                    path.pop();
                }
            }
        }
        dfs(g, start, &mut path, &mut out);
    }
    out
}

pub fn reachable_from(g: &Graph, source: NodeId) -> Vec<NodeId> {
    let mut seen = vec![source];
    let mut stack = vec![source];
    while let Some(u) = stack.pop() {
        for &(v, _) in g.out_edges(u) {
            if !seen.contains(&v) {
                seen.push(v);
                stack.push(v);
            }
        }
    }
    seen
}

/// True when some cycle with negative total weight touches a node
/// reachable from `source`.
pub fn has_reachable_negative_cycle(g: &Graph, source: NodeId) -> bool {
    let reach = reachable_from(g, source);
    simple_cycles(g).iter().any(|c| {
        let w: Cost = (0..c.len())
            .map(|i| g.weight(c[i], c[(i + 1) % c.len()]).unwrap())
            .sum();
        w < 0 && c.iter().any(|v| reach.contains(v))
    })
}

/// Outcome of the synchronous RIP round harness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RipRounds {
    pub rounds: usize,
    pub max_metric_seen: u8,
    pub final_metrics: Vec<u8>,
}

/// Triangle A-B-C, with A also attached to router D that owns host X.
/// After convergence A loses its interface toward D. Each round is one
/// advertisement period: route timers run, then each router in turn
/// advertises its current table. A goes last, so it hears its neighbours'
/// stale routes before it can announce the loss. The count stops once every
/// router holds X as unreachable and a round changes nothing.
pub fn rip_triangle_withdrawal(split_horizon: bool, max_rounds: usize) -> RipRounds {
    let cfg = RipConfig {
        split_horizon,
        ..RipConfig::default()
    };
    let (d, a, b, c, x) = (n(0), n(1), n(2), n(3), n(9));
    // Interfaces: D: 0->A. A: 0->D, 1->B, 2->C. B: 0->A, 1->C. C: 0->A, 1->B.
    let links: BTreeMap<(NodeId, u32), (NodeId, u32)> = [
        ((d, 0), (a, 0)),
        ((a, 1), (b, 0)),
        ((a, 2), (c, 0)),
        ((b, 1), (c, 1)),
    ]
    .into_iter()
    .flat_map(|(p, q)| [(p, q), (q, p)])
    .collect();
    let mut tables: BTreeMap<NodeId, RipTable> = BTreeMap::new();
    tables.insert(d, RipTable::with_connected([(x, InterfaceId(1))]));
    for r in [a, b, c] {
        tables.insert(r, RipTable::new());
    }
    let mut up: BTreeMap<(NodeId, u32), bool> = links.keys().map(|&k| (k, true)).collect();

    let period = cfg.advertise_interval;
    let round = |tables: &mut BTreeMap<NodeId, RipTable>,
                 up: &BTreeMap<(NodeId, u32), bool>,
                 now: u64| {
        let mut changed = false;
        for t in tables.values_mut() {
            let out = t.tick(&cfg, now);
            changed |= !out.expired_dests.is_empty() || !out.removed_dests.is_empty();
        }
        for sender in [d, b, c, a] {
            let ifaces: Vec<InterfaceId> = links
                .keys()
                .filter(|(r, i)| *r == sender && up[&(*r, *i)])
                .map(|&(_, i)| InterfaceId(i))
                .collect();
            let advs = tables[&sender].build_advertisements(sender, &ifaces, &cfg);
            for (iface, adv) in advs {
                let (peer, peer_if) = links[&(sender, iface.0)];
                changed |= tables
                    .get_mut(&peer)
                    .unwrap()
                    .process_advertisement(&adv, InterfaceId(peer_if), &cfg, now)
                    .unwrap();
            }
        }
        changed
    };

    let mut now = 0;
    for _ in 0..20 {
        now += period;
        if !round(&mut tables, &up, now) {
            break;
        }
    }
    assert_eq!(tables[&a].metric(x), Some(2), "converged before withdrawal");

    up.insert((a, 0), false);
    up.insert((d, 0), false);
    tables.get_mut(&a).unwrap().on_interface_down(InterfaceId(0), &cfg, now);

    let metric_of = |tables: &BTreeMap<NodeId, RipTable>| -> Vec<u8> {
        [a, b, c]
            .iter()
            .map(|r| tables[r].get(x).map_or(INFINITY, |e: &RipRouteEntry| e.metric))
            .collect()
    };
    let mut max_seen = 0;
    let mut rounds = 0;
    while rounds < max_rounds {
        now += period;
        let changed = round(&mut tables, &up, now);
        let metrics = metric_of(&tables);
        max_seen = max_seen.max(*metrics.iter().max().unwrap());
        rounds += 1;
        if !changed && metrics.iter().all(|&m| m == INFINITY) {
            break;
        }
    }
    RipRounds {
        rounds,
        max_metric_seen: max_seen,
        final_metrics: metric_of(&tables),
    }
}

/// Random connected router-only topology wrapped in a scenario. Each router
/// gets one host so every router is also a destination owner.
pub fn random_router_scenario(
    rng: &mut impl Rng,
    routers: u32,
    extra_links: u32,
    protocol: Protocol,
) -> Scenario {
    let mut nodes = Vec::new();
    for i in 0..routers {
        nodes.push(NodeSpec {
            name: format!("R{i}"),
            kind: NodeKind::Router,
        });
    }
    for i in 0..routers {
        nodes.push(NodeSpec {
            name: format!("H{i}"),
            kind: NodeKind::Host,
        });
    }
    let bws = [10_000_000u64, 100_000_000, 1_000_000_000];
    let mut links: Vec<LinkSpec> = Vec::new();
    let add = |a: u32, b: u32, links: &mut Vec<LinkSpec>, rng: &mut dyn rand::RngCore| {
        let exists = links
            .iter()
            .any(|l| (l.a, l.b) == (n(a), n(b)) || (l.a, l.b) == (n(b), n(a)));
        if a != b && !exists {
            links.push(LinkSpec {
                a: n(a),
                b: n(b),
                bandwidth_bps: bws[rng.gen_range(0..bws.len())],
                prop_delay_us: rng.gen_range(1..500),
            });
        }
    };
    for i in 1..routers {
        let j = rng.gen_range(0..i);
        add(j, i, &mut links, rng);
    }
    for _ in 0..extra_links {
        let a = rng.gen_range(0..routers);
        let b = rng.gen_range(0..routers);
        add(a, b, &mut links, rng);
    }
    for i in 0..routers {
        links.push(LinkSpec {
            a: n(i),
            b: n(routers + i),
            bandwidth_bps: 10_000_000,
            prop_delay_us: 5,
        });
    }
    Scenario {
        name: "random".into(),
        duration_s: 120,
        seed: 0,
        bucket_s: 1,
        protocol,
        nodes,
        links,
        failures: Vec::new(),
        flows: Vec::new(),
    }
}

/// One copy of `s` per link, each failing only that link at `fail_at` and
/// carrying no traffic.
pub fn single_failure_variants(s: &Scenario, fail_at: u64, duration: u64) -> Vec<(usize, Scenario)> {
    (0..s.links.len())
        .map(|i| {
            let mut v = s.clone();
            v.duration_s = duration;
            v.flows.clear();
            v.failures = vec![FailureSpec {
                time_s: fail_at,
                a: s.links[i].a,
                b: s.links[i].b,
                status: LinkStatus::Down,
            }];
            (i, v)
        })
        .collect()
}

/// Whether `to` can be reached from `from` over links not in `down`,
/// passing only through routers and switches.
pub fn physically_reachable(s: &Scenario, down: &[usize], from: NodeId, to: NodeId) -> bool {
    let mut seen = vec![from];
    let mut stack = vec![from];
    while let Some(u) = stack.pop() {
        if u == to {
            return true;
        }
        if u != from && s.kind(u) == NodeKind::Host {
            continue;
        }
        for (i, l) in s.links.iter().enumerate() {
            if down.contains(&i) {
                continue;
            }
            let v = if l.a == u {
                l.b
            } else if l.b == u {
                l.a
            } else {
                continue;
            };
            if !seen.contains(&v) {
                seen.push(v);
                stack.push(v);
            }
        }
    }
    false
}

/// Directed graph of the scenario where only routers originate edges, so
/// hosts are sinks. Links in `down` are left out.
pub fn routed_graph(s: &Scenario, down: &[usize], cost: impl Fn(&LinkSpec) -> Cost) -> Graph {
    let mut g = Graph::new();
    for i in 0..s.nodes.len() {
        g.add_node(NodeId(i as u32));
    }
    for (i, l) in s.links.iter().enumerate() {
        if down.contains(&i) {
            continue;
        }
        for (a, b) in [(l.a, l.b), (l.b, l.a)] {
            if s.kind(a) == NodeKind::Router {
                g.add_edge(a, b, cost(l)).unwrap();
            }
        }
    }
    g
}
