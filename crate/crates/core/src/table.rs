use std::collections::BTreeMap;

use crate::types::{InterfaceId, NodeId};

/// One forwarding decision: send toward `next_hop` out of `iface`.
/// `metric` is in the owning protocol's units and only comparable within
/// that protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub next_hop: NodeId,
    pub iface: InterfaceId,
    pub metric: u64,
}

/// Per-router map from destination to forwarding decision.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForwardingTable {
    routes: BTreeMap<NodeId, Route>,
}

impl ForwardingTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dest: NodeId, route: Route) {
        self.routes.insert(dest, route);
    }

    pub fn get(&self, dest: NodeId) -> Option<&Route> {
        self.routes.get(&dest)
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Route)> {
        self.routes.iter().map(|(d, r)| (*d, r))
    }

    /// True when both tables send every destination to the same neighbour
    /// on the same interface. Metric-only differences do not count.
    pub fn same_forwarding(&self, other: &ForwardingTable) -> bool {
        self.routes.len() == other.routes.len()
            && self
                .routes
                .iter()
                .zip(other.routes.iter())
                .all(|((da, ra), (db, rb))| {
                    da == db && ra.next_hop == rb.next_hop && ra.iface == rb.iface
                })
    }
}

impl FromIterator<(NodeId, Route)> for ForwardingTable {
    fn from_iter<T: IntoIterator<Item = (NodeId, Route)>>(iter: T) -> Self {
        ForwardingTable {
            routes: iter.into_iter().collect(),
        }
    }
}
