//! Distance-vector routing with hop-count metrics, split horizon, triggered
//! updates and the timeout / garbage-collection timer pair.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::{ControlMessage, EngineCtx, IfaceView, RoutingEngine};
use crate::table::{ForwardingTable, Route};
use crate::types::{InterfaceId, NodeId, SimTime};

/// Hop count that means "unreachable".
pub const INFINITY: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RipConfig {
    pub advertise_interval: u64,
    pub timeout: u64,
    pub gc_interval: u64,
    pub split_horizon: bool,
    pub triggered_updates: bool,
}

impl Default for RipConfig {
    fn default() -> Self {
        RipConfig {
            advertise_interval: 30,
            timeout: 180,
            gc_interval: 120,
            split_horizon: true,
            triggered_updates: true,
        }
    }
}

impl RipConfig {
    pub fn infinity_metric(&self) -> u8 {
        INFINITY
    }

    pub fn validate(&self) -> Result<(), RipError> {
        if self.advertise_interval == 0 || self.timeout <= self.advertise_interval {
            return Err(RipError::BadConfig("timeout must exceed a non-zero advertise interval"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RipError {
    #[error("advertisement metric {0} outside 1..=16")]
    MetricOutOfRange(u8),
    #[error("destination {0} listed twice in one advertisement")]
    DuplicateDestination(NodeId),
    #[error("invalid config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RipRouteEntry {
    pub dest: NodeId,
    pub metric: u8,
    pub next_hop: NodeId,
    pub learned_interface: InterfaceId,
    /// Seconds.
    pub last_refresh: u64,
    /// Seconds; present exactly when the route is at metric 16.
    pub gc_deadline: Option<u64>,
}

impl RipRouteEntry {
    pub fn is_reachable(&self) -> bool {
        self.metric < INFINITY
    }

    fn poison(&mut self, now: u64, cfg: &RipConfig) {
        self.metric = INFINITY;
        self.gc_deadline = Some(now + cfg.gc_interval);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RipAdvertisement {
    pub sender: NodeId,
    pub routes: Vec<(NodeId, u8)>,
}

impl RipAdvertisement {
    pub fn validate(&self) -> Result<(), RipError> {
        let mut seen = BTreeSet::new();
        for &(dest, metric) in &self.routes {
            if !(1..=INFINITY).contains(&metric) {
                return Err(RipError::MetricOutOfRange(metric));
            }
            if !seen.insert(dest) {
                return Err(RipError::DuplicateDestination(dest));
            }
        }
        Ok(())
    }

    pub fn metric_for(&self, dest: NodeId) -> Option<u8> {
        self.routes.iter().find(|r| r.0 == dest).map(|r| r.1)
    }
}

/// Learned routes plus the router's directly attached destinations.
/// Connected destinations are never overridden by advertisements.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RipTable {
    entries: BTreeMap<NodeId, RipRouteEntry>,
    connected: BTreeMap<NodeId, InterfaceId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TickOutcome {
    pub emit_periodic: bool,
    /// Destinations whose timeout fired this tick.
    pub expired_dests: Vec<NodeId>,
    /// Destinations removed by garbage collection this tick.
    pub removed_dests: Vec<NodeId>,
}

impl RipTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_connected(connected: impl IntoIterator<Item = (NodeId, InterfaceId)>) -> Self {
        RipTable {
            entries: BTreeMap::new(),
            connected: connected.into_iter().collect(),
        }
    }

    pub fn get(&self, dest: NodeId) -> Option<&RipRouteEntry> {
        self.entries.get(&dest)
    }

    pub fn entries(&self) -> impl Iterator<Item = &RipRouteEntry> {
        self.entries.values()
    }

    pub fn insert(&mut self, entry: RipRouteEntry) {
        self.entries.insert(entry.dest, entry);
    }

    pub fn connected(&self) -> &BTreeMap<NodeId, InterfaceId> {
        &self.connected
    }

    /// Metric toward `dest`: 1 for connected, the table metric otherwise.
    pub fn metric(&self, dest: NodeId) -> Option<u8> {
        if self.connected.contains_key(&dest) {
            Some(1)
        } else {
            self.entries.get(&dest).map(|e| e.metric)
        }
    }

    /// Merges a neighbour's advertisement. Returns whether any entry's
    /// (metric, next hop) changed. A malformed advertisement is rejected
    /// as a whole and leaves the table untouched.
    pub fn process_advertisement(
        &mut self,
        adv: &RipAdvertisement,
        in_interface: InterfaceId,
        cfg: &RipConfig,
        now: u64,
    ) -> Result<bool, RipError> {
        adv.validate()?;
        let mut changed = false;
        for &(dest, metric) in &adv.routes {
            if self.connected.contains_key(&dest) {
                continue;
            }
            let candidate = (metric + 1).min(INFINITY);
            match self.entries.get_mut(&dest) {
                None => {
                    self.entries.insert(
                        dest,
                        RipRouteEntry {
                            dest,
                            metric: candidate,
                            next_hop: adv.sender,
                            learned_interface: in_interface,
                            last_refresh: now,
                            gc_deadline: (candidate == INFINITY).then_some(now + cfg.gc_interval),
                        },
                    );
                    changed = true;
                }
                Some(e) if e.next_hop == adv.sender && e.learned_interface == in_interface => {
                    if candidate == INFINITY {
                        if e.metric != INFINITY {
                            e.poison(now, cfg);
                            changed = true;
                        }
                    } else {
                        changed |= e.metric != candidate;
                        e.metric = candidate;
                        e.last_refresh = now;
                        e.gc_deadline = None;
                    }
                }
                Some(e) if candidate < e.metric => {
                    *e = RipRouteEntry {
                        dest,
                        metric: candidate,
                        next_hop: adv.sender,
                        learned_interface: in_interface,
                        last_refresh: now,
                        gc_deadline: None,
                    };
                    changed = true;
                }
                Some(_) => {}
            }
        }
        Ok(changed)
    }

    /// Per-interface advertisements. With split horizon a route is left out
    /// of the advertisement sent on the interface it was learned on.
    pub fn build_advertisements(
        &self,
        me: NodeId,
        interfaces: &[InterfaceId],
        cfg: &RipConfig,
    ) -> BTreeMap<InterfaceId, RipAdvertisement> {
        interfaces
            .iter()
            .map(|&iface| {
                let mut routes: Vec<(NodeId, u8)> =
                    self.connected.keys().map(|&d| (d, 1)).collect();
                routes.extend(
                    self.entries
                        .values()
                        .filter(|e| !(cfg.split_horizon && e.learned_interface == iface))
                        .map(|e| (e.dest, e.metric)),
                );
                (iface, RipAdvertisement { sender: me, routes })
            })
            .collect()
    }

    /// Whole-second timer processing.
    pub fn tick(&mut self, cfg: &RipConfig, now: u64) -> TickOutcome {
        let mut out = TickOutcome {
            emit_periodic: now.is_multiple_of(cfg.advertise_interval),
            ..Default::default()
        };
        for e in self.entries.values_mut() {
            if e.is_reachable() && now.saturating_sub(e.last_refresh) >= cfg.timeout {
                e.poison(now, cfg);
                out.expired_dests.push(e.dest);
            }
        }
        self.entries.retain(|&d, e| match e.gc_deadline {
            Some(deadline) if now >= deadline => {
                out.removed_dests.push(d);
                false
            }
            _ => true,
        });
        out
    }

    /// Carrier loss: every route learned on `iface` becomes unreachable at
    /// once. Returns whether a triggered update should go out.
    pub fn on_interface_down(&mut self, iface: InterfaceId, cfg: &RipConfig, now: u64) -> bool {
        let mut changed = false;
        for e in self.entries.values_mut() {
            if e.learned_interface == iface && e.is_reachable() {
                e.poison(now, cfg);
                changed = true;
            }
        }
        changed && cfg.triggered_updates
    }

    pub fn forwarding(&self) -> ForwardingTable {
        let connected = self.connected.iter().map(|(&d, &iface)| {
            (
                d,
                Route {
                    next_hop: d,
                    iface,
                    metric: 1,
                },
            )
        });
        let learned = self.entries.values().filter(|e| e.is_reachable()).map(|e| {
            (
                e.dest,
                Route {
                    next_hop: e.next_hop,
                    iface: e.learned_interface,
                    metric: e.metric as u64,
                },
            )
        });
        connected.chain(learned).collect()
    }
}

/// RIP instance on one router.
pub struct RipEngine {
    cfg: RipConfig,
    table: RipTable,
    forwarding: ForwardingTable,
    malformed: u64,
}

impl RipEngine {
    pub fn new(cfg: RipConfig, ifaces: &[IfaceView]) -> Self {
        let connected = ifaces
            .iter()
            .flat_map(|i| i.hosts.iter().map(move |&h| (h, i.id)));
        let table = RipTable::with_connected(connected);
        let forwarding = table.forwarding();
        RipEngine {
            cfg,
            table,
            forwarding,
            malformed: 0,
        }
    }

    pub fn table(&self) -> &RipTable {
        &self.table
    }

    fn advertise(&self, ctx: &mut EngineCtx<'_>) {
        let ifaces: Vec<InterfaceId> = ctx.routed_ifaces().map(|i| i.id).collect();
        for (iface, adv) in self.table.build_advertisements(ctx.me, &ifaces, &self.cfg) {
            if !adv.routes.is_empty() {
                ctx.send(iface, None, ControlMessage::Rip(adv));
            }
        }
    }

    fn refresh_forwarding(&mut self) {
        self.forwarding = self.table.forwarding();
    }
}

fn secs(now: SimTime) -> u64 {
    now.secs()
}

impl RoutingEngine for RipEngine {
    fn on_tick(&mut self, ctx: &mut EngineCtx<'_>) {
        let out = self.table.tick(&self.cfg, secs(ctx.now));
        if !out.expired_dests.is_empty() || !out.removed_dests.is_empty() {
            self.refresh_forwarding();
        }
        if out.emit_periodic || (!out.expired_dests.is_empty() && self.cfg.triggered_updates) {
            self.advertise(ctx);
        }
    }

    fn on_message(
        &mut self,
        ctx: &mut EngineCtx<'_>,
        iface: InterfaceId,
        from: NodeId,
        msg: &ControlMessage,
    ) {
        let ControlMessage::Rip(adv) = msg else {
            self.malformed += 1;
            return;
        };
        if adv.sender != from || !ctx.is_peer(iface, from) {
            self.malformed += 1;
            return;
        }
        match self
            .table
            .process_advertisement(adv, iface, &self.cfg, secs(ctx.now))
        {
            Ok(true) => {
                self.refresh_forwarding();
                if self.cfg.triggered_updates {
                    self.advertise(ctx);
                }
            }
            Ok(false) => {}
            Err(_) => self.malformed += 1,
        }
    }

    fn on_interface_change(&mut self, ctx: &mut EngineCtx<'_>, iface: InterfaceId, up: bool) {
        if up {
            return;
        }
        let triggered = self.table.on_interface_down(iface, &self.cfg, secs(ctx.now));
        self.refresh_forwarding();
        if triggered {
            self.advertise(ctx);
        }
    }

    fn forwarding(&self) -> &ForwardingTable {
        &self.forwarding
    }

    fn malformed_count(&self) -> u64 {
        self.malformed
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
