//! Built-in scenarios.
//!
//! `figure2`: two hosts, two switches and six routers. The short path is
//! PC1-SW1-R6-SW2-PC2; the long path runs SW1-R1-R2-R3-R4-R5-SW2. Link
//! R1-R2 fails and recovers on a fixed schedule. `figure2_fastpath` upgrades
//! the long path to 100 Mbit/s and has no failures.

use crate::scenario::{FailureSpec, FlowSpec, LinkSpec, LinkStatus, NodeKind, NodeSpec, Scenario};
use crate::types::{NodeId, Protocol};

pub const NAMES: [&str; 2] = ["figure2", "figure2_fastpath"];

const SLOW_BPS: u64 = 10_000_000;
const FAST_BPS: u64 = 100_000_000;
const PROP_US: u64 = 5;

/// (time_s, status) for link R1-R2.
pub const FIGURE2_SCHEDULE: [(u64, LinkStatus); 10] = [
    (225, LinkStatus::Down),
    (400, LinkStatus::Up),
    (535, LinkStatus::Down),
    (590, LinkStatus::Up),
    (605, LinkStatus::Down),
    (620, LinkStatus::Up),
    (625, LinkStatus::Down),
    (630, LinkStatus::Up),
    (730, LinkStatus::Down),
    (830, LinkStatus::Up),
];

const NODES: [(&str, NodeKind); 10] = [
    ("PC1", NodeKind::Host),
    ("PC2", NodeKind::Host),
    ("SW1", NodeKind::Switch),
    ("SW2", NodeKind::Switch),
    ("R1", NodeKind::Router),
    ("R2", NodeKind::Router),
    ("R3", NodeKind::Router),
    ("R4", NodeKind::Router),
    ("R5", NodeKind::Router),
    ("R6", NodeKind::Router),
];

/// (a, b, on the long path)
const LINKS: [(&str, &str, bool); 10] = [
    ("PC1", "SW1", false),
    ("SW1", "R6", false),
    ("R6", "SW2", false),
    ("SW2", "PC2", false),
    ("SW1", "R1", true),
    ("R1", "R2", true),
    ("R2", "R3", true),
    ("R3", "R4", true),
    ("R4", "R5", true),
    ("R5", "SW2", true),
];

fn id(name: &str) -> NodeId {
    let i = NODES
        .iter()
        .position(|(n, _)| *n == name)
        .expect("node in reference table");
    NodeId(i as u32)
}

fn build(name: &str, long_path_bps: u64, failures: bool) -> Scenario {
    Scenario {
        name: name.to_string(),
        duration_s: 900,
        seed: 1,
        bucket_s: 1,
        protocol: Protocol::Ospf,
        nodes: NODES
            .iter()
            .map(|&(n, kind)| NodeSpec {
                name: n.to_string(),
                kind,
            })
            .collect(),
        links: LINKS
            .iter()
            .map(|&(a, b, long)| LinkSpec {
                a: id(a),
                b: id(b),
                bandwidth_bps: if long { long_path_bps } else { SLOW_BPS },
                prop_delay_us: PROP_US,
            })
            .collect(),
        failures: if failures {
            FIGURE2_SCHEDULE
                .iter()
                .map(|&(time_s, status)| FailureSpec {
                    time_s,
                    a: id("R1"),
                    b: id("R2"),
                    status,
                })
                .collect()
        } else {
            Vec::new()
        },
        // Starts after the warm-up so every protocol has converged.
        flows: vec![FlowSpec {
            src: id("PC1"),
            dst: id("PC2"),
            start_s: 30,
            stop_s: 900,
            rate_pps: 100,
            rate_bps: 120_000,
        }],
    }
}

pub fn figure2() -> Scenario {
    build("figure2", SLOW_BPS, true)
}

pub fn figure2_fastpath() -> Scenario {
    build("figure2_fastpath", FAST_BPS, false)
}

pub fn reference_scenarios() -> Vec<Scenario> {
    vec![figure2(), figure2_fastpath()]
}

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "figure2" => Some(figure2()),
        "figure2_fastpath" => Some(figure2_fastpath()),
        _ => None,
    }
}
