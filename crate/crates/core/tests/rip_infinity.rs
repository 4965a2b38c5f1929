mod common;

use common::rip_triangle_withdrawal;
use routesim_core::rip::INFINITY;

#[test]
fn without_split_horizon_counts_to_exactly_sixteen() {
    let r = rip_triangle_withdrawal(false, 200);
    assert_eq!(r.max_metric_seen, INFINITY);
    assert_eq!(r.final_metrics, vec![INFINITY; 3]);
    assert!(r.rounds > 3, "expected a visible count-up, got {r:?}");
}

#[test]
fn split_horizon_quiesces_sooner() {
    let off = rip_triangle_withdrawal(false, 200);
    let on = rip_triangle_withdrawal(true, 200);
    assert_eq!(on.max_metric_seen, INFINITY);
    assert_eq!(on.final_metrics, vec![INFINITY; 3]);
    assert!(on.rounds < off.rounds, "on {on:?} off {off:?}");
}
