//! Whole-run drivers.

use std::thread;

use crate::report::Report;
use crate::scenario::Scenario;
use crate::sim::{SimError, SimOptions, Simulation};
use crate::types::Protocol;

pub fn run_scenario(scenario: &Scenario) -> Result<Report, SimError> {
    run_scenario_with(scenario, SimOptions::default())
}

pub fn run_scenario_with(scenario: &Scenario, opts: SimOptions) -> Result<Report, SimError> {
    let mut sim = Simulation::new(scenario, opts)?;
    sim.run();
    Ok(report_of(&sim))
}

pub fn report_of(sim: &Simulation) -> Report {
    let s = sim.scenario();
    Report {
        scenario: s.name.clone(),
        protocol: s.protocol,
        duration_s: s.duration_s,
        seed: s.seed,
        series: sim.metrics().clone(),
        stats: sim.stats().clone(),
    }
}

/// Runs every protocol on the scenario, one thread per run. Reports come
/// back in `Protocol::ALL` order.
pub fn compare(scenario: &Scenario, opts: &SimOptions) -> Result<Vec<Report>, SimError> {
    thread::scope(|scope| {
        let handles: Vec<_> = Protocol::ALL
            .iter()
            .map(|&p| {
                let s = scenario.with_protocol(p);
                let o = opts.clone();
                scope.spawn(move || run_scenario_with(&s, o))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    })
}
