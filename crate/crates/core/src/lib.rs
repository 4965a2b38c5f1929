//! Routing protocol simulator: shortest-path algorithms, RIP, link-state
//! (OSPF and IS-IS flavours), EIGRP/DUAL, and a discrete-event kernel that
//! runs them over host/switch/router topologies.

pub mod eigrp;
pub mod engine;
pub mod eventq;
pub mod graph;
pub mod linkstate;
pub mod metrics;
pub mod reference;
pub mod report;
pub mod rip;
pub mod run;
pub mod scenario;
pub mod sim;
pub mod table;
pub mod types;

pub use graph::{Cost, Dist, Graph, GraphError, PathResult};
pub use table::{ForwardingTable, Route};
pub use scenario::{parse_scenario, serialize_scenario, Scenario};
pub use report::Report;
pub use run::{compare, run_scenario, run_scenario_with};
pub use sim::{SimError, SimOptions, Simulation};
pub use types::{InterfaceId, NodeId, Protocol, SimTime};
