mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use routesim_core::reference::{figure2, figure2_fastpath};
use routesim_core::run::report_of;
use routesim_core::scenario::{FailureSpec, FlowSpec, LinkStatus};
use routesim_core::sim::KernelStats;
use routesim_core::{Protocol, Scenario, SimOptions, SimTime, Simulation};

/// Random routed topology with traffic between random host pairs and a few
/// random link flaps. Rates go high enough to overrun 10 Mbit/s links.
fn loaded_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let routers = rng.gen_range(2..6);
    let proto = Protocol::ALL[rng.gen_range(0..4)];
    let extra = rng.gen_range(0..3);
    let mut s = random_router_scenario(&mut rng, routers, extra, proto);
    s.duration_s = 60;
    let hosts: Vec<_> = s.host_ids().collect();
    for _ in 0..rng.gen_range(1..4) {
        let src = hosts[rng.gen_range(0..hosts.len())];
        let dst = hosts[rng.gen_range(0..hosts.len())];
        if src == dst {
            continue;
        }
        let pps = rng.gen_range(10..1500);
        s.flows.push(FlowSpec {
            src,
            dst,
            start_s: rng.gen_range(0..30),
            stop_s: rng.gen_range(30..60),
            rate_pps: pps,
            rate_bps: pps * 12_000,
        });
    }
    let routed: Vec<usize> = (0..s.links.len())
        .filter(|&i| s.kind(s.links[i].b) == routesim_core::scenario::NodeKind::Router)
        .collect();
    for _ in 0..rng.gen_range(0..3) {
        if routed.is_empty() {
            break;
        }
        let l = &s.links[routed[rng.gen_range(0..routed.len())]];
        let status = if rng.gen_bool(0.6) { LinkStatus::Down } else { LinkStatus::Up };
        s.failures.push(FailureSpec {
            time_s: rng.gen_range(1..59),
            a: l.a,
            b: l.b,
            status,
        });
    }
    s.failures.sort_by_key(|f| f.time_s);
    s.validate().unwrap();
    s
}

fn assert_conserved(st: &KernelStats) {
    assert_eq!(st.generated, st.delivered + st.dropped_total() + st.in_flight);
    for f in &st.per_flow {
        assert_eq!(f.generated, f.delivered + f.dropped + f.in_flight, "{f:?}");
    }
    assert_eq!(st.per_flow.iter().map(|f| f.generated).sum::<u64>(), st.generated);
    assert_eq!(st.per_flow.iter().map(|f| f.delivered).sum::<u64>(), st.delivered);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn packets_are_conserved_at_every_checkpoint(seed in any::<u64>()) {
        let s = loaded_scenario(seed);
        let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
        for t in [10, 25, 40, 55] {
            sim.run_until(SimTime::from_secs(t));
            assert_conserved(sim.stats());
        }
        sim.run();
        assert_conserved(sim.stats());
        let m = sim.metrics().total();
        prop_assert_eq!(m.delivered, sim.stats().delivered);
        prop_assert_eq!(m.dropped, sim.stats().dropped_total());
    }

    #[test]
    fn same_input_same_output(seed in any::<u64>()) {
        let s = loaded_scenario(seed);
        let run = || {
            let mut sim = Simulation::new(&s, SimOptions { record_trace: true, ..SimOptions::default() }).unwrap();
            sim.run();
            (sim.trace().to_vec(), sim.stats().clone(), report_of(&sim).csv())
        };
        prop_assert!(run() == run());
    }
}

#[test]
fn congestion_drops_appear_under_overload() {
    let mut s = loaded_scenario(1);
    s.failures.clear();
    let hosts: Vec<_> = s.host_ids().collect();
    s.flows = vec![FlowSpec {
        src: hosts[0],
        dst: hosts[1],
        start_s: 30,
        stop_s: 40,
        rate_pps: 2000,
        rate_bps: 2000 * 12_000,
    }];
    let mut sim = Simulation::new(&s, SimOptions::default()).unwrap();
    sim.run();
    let st = sim.stats();
    assert_conserved(st);
    assert!(st.dropped[&routesim_core::sim::DropReason::Congestion] > 0);
}

#[test]
fn figure2_uses_the_direct_router_before_the_first_failure() {
    let base = figure2();
    for p in Protocol::ALL {
        let mut sim = Simulation::new(&base.with_protocol(p), SimOptions::default()).unwrap();
        sim.run();
        let m = sim.metrics();
        for i in 0..m.len() {
            let start = m.bucket_start_s(i);
            if start >= 225 {
                break;
            }
            if let Some(h) = m.buckets[i].mean_hops() {
                assert_eq!(h, 1.0, "{p} bucket at {start}s");
            }
        }
    }
}

#[test]
fn no_table_churn_after_warm_up_without_failures() {
    let mut s = figure2_fastpath();
    s.duration_s = 400;
    s.flows[0].stop_s = 400;
    for p in Protocol::ALL {
        let mut sim = Simulation::new(&s.with_protocol(p), SimOptions::default()).unwrap();
        sim.run();
        let late = sim.metrics().window(60, 400);
        assert!(!late.convergence_active, "{p}");
        assert_eq!(late.dropped, 0, "{p}");
    }
}

#[test]
fn report_totals_match_kernel_counters() {
    let mut sim = Simulation::new(&figure2(), SimOptions::default()).unwrap();
    sim.run();
    let r = report_of(&sim);
    assert_eq!(r.stats, *sim.stats());
    let t = r.series.total();
    assert_eq!(t.delivered, sim.stats().delivered);
    assert_eq!(t.control_bits, sim.stats().control_bits);
    assert_eq!(r.csv().lines().count(), r.series.len() + 1);
}

#[test]
fn trace_recount_matches_counters() {
    use routesim_core::sim::EventKind;
    let s = figure2();
    let mut sim = Simulation::new(&s, SimOptions { record_trace: true, ..SimOptions::default() }).unwrap();
    sim.run();
    let count = |k| sim.trace().iter().filter(|e| e.kind == k).count() as u64;
    let st = sim.stats();
    assert_eq!(count(EventKind::PacketGeneration), st.generated);
    assert_eq!(count(EventKind::LinkStatusChange), s.failures.len() as u64);
    assert_eq!(count(EventKind::TimerTick), s.duration_s);
    // Every data frame arrival is a delivery or a further hop, so there are
    // at least as many as delivered packets times path length.
    assert!(count(EventKind::PacketArrival) >= st.delivered * 4);
    let r = report_of(&sim);
    assert_eq!(r.series.total().delivered + r.series.total().dropped + st.in_flight, count(EventKind::PacketGeneration));
    assert!(sim.trace().windows(2).all(|w| (w[0].time, w[0].seq) < (w[1].time, w[1].seq)));
}
