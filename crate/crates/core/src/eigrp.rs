//! EIGRP: hello-driven neighbour discovery, a bandwidth + delay composite
//! metric, and DUAL route selection with feasible successors and
//! query/reply diffusing computations.
//!
//! Path metrics are additive: each link contributes
//! [`composite_metric`] of its own bandwidth and delay, and a neighbour's
//! computed distance is its reported distance plus the metric of the link
//! to it. Additivity keeps DUAL's distributed computation exact.
//!
//! Reliable transport is provided by the kernel (lossless, in-order links
//! while up), so there are no acknowledgements or retransmissions here.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::{ControlMessage, EngineCtx, IfaceView, RoutingEngine};
use crate::table::{ForwardingTable, Route};
use crate::types::{InterfaceId, NodeId, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EigrpError {
    #[error("bandwidth must be at least 1 kbit/s")]
    ZeroBandwidth,
    #[error("neighbour {0} has not reported this destination")]
    UnknownNeighbor(NodeId),
    #[error("route computation requested while destination {0} is active")]
    Active(NodeId),
    #[error("invalid config: {0}")]
    BadConfig(&'static str),
}

/// `256 * (10^7 / bandwidth_kbps + delay_us / 10)`, integer arithmetic.
pub fn composite_metric(min_bandwidth_bps: u64, total_delay_us: u64) -> Result<u64, EigrpError> {
    let kbps = min_bandwidth_bps / 1000;
    if kbps == 0 {
        return Err(EigrpError::ZeroBandwidth);
    }
    Ok(256 * (10_000_000 / kbps + total_delay_us / 10))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EigrpConfig {
    pub hello_interval: u64,
    pub hold_time: u64,
    /// Added to a link's propagation delay for the delay term.
    pub interface_delay_us: u64,
}

impl Default for EigrpConfig {
    fn default() -> Self {
        EigrpConfig {
            hello_interval: 5,
            hold_time: 15,
            interface_delay_us: 100,
        }
    }
}

impl EigrpConfig {
    pub fn validate(&self) -> Result<(), EigrpError> {
        if self.hello_interval == 0 || self.hold_time < 2 * self.hello_interval {
            return Err(EigrpError::BadConfig("hold time must be at least twice the hello interval"));
        }
        Ok(())
    }

    pub fn link_metric(&self, bandwidth_bps: u64, prop_delay_us: u64) -> Result<u64, EigrpError> {
        composite_metric(bandwidth_bps, prop_delay_us + self.interface_delay_us)
    }
}

/// A route list entry: destination and distance (`None` = unreachable).
pub type RouteAd = (NodeId, Option<u64>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EigrpMessage {
    Hello,
    Update(Vec<RouteAd>),
    Query(Vec<RouteAd>),
    Reply(Vec<RouteAd>),
}

impl EigrpMessage {
    pub fn route_count(&self) -> usize {
        match self {
            EigrpMessage::Hello => 0,
            EigrpMessage::Update(r) | EigrpMessage::Query(r) | EigrpMessage::Reply(r) => r.len(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborEntry {
    pub neighbor: NodeId,
    pub interface: InterfaceId,
    pub last_hello: SimTime,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Neighbors {
    map: BTreeMap<NodeId, NeighborEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NeighborChanges {
    pub lost: Vec<NodeId>,
    pub found: Vec<NodeId>,
}

impl Neighbors {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: NodeId) -> Option<&NeighborEntry> {
        self.map.get(&n)
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.map.contains_key(&n)
    }

    pub fn ids(&self) -> BTreeSet<NodeId> {
        self.map.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Any packet from a neighbour counts as a hello.
    pub fn heard(&mut self, iface: InterfaceId, from: NodeId, now: SimTime) -> NeighborChanges {
        let mut out = NeighborChanges::default();
        match self.map.get_mut(&from) {
            Some(e) => e.last_hello = now,
            None => {
                self.map.insert(
                    from,
                    NeighborEntry {
                        neighbor: from,
                        interface: iface,
                        last_hello: now,
                    },
                );
                out.found.push(from);
            }
        }
        out
    }

    /// Hold-timer expiry.
    pub fn tick(&mut self, cfg: &EigrpConfig, now: SimTime) -> NeighborChanges {
        let hold = SimTime::from_secs(cfg.hold_time).as_micros();
        self.remove_where(|e| now - e.last_hello >= hold)
    }

    /// Carrier loss drops every neighbour on the interface immediately.
    pub fn interface_down(&mut self, iface: InterfaceId) -> NeighborChanges {
        self.remove_where(|e| e.interface == iface)
    }

    fn remove_where(&mut self, pred: impl Fn(&NeighborEntry) -> bool) -> NeighborChanges {
        let lost: Vec<NodeId> = self
            .map
            .values()
            .filter(|e| pred(e))
            .map(|e| e.neighbor)
            .collect();
        for n in &lost {
            self.map.remove(n);
        }
        NeighborChanges {
            lost,
            found: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualState {
    Passive,
    Active,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reported {
    pub reported_distance: u64,
    pub link_metric: u64,
}

impl Reported {
    pub fn computed(&self) -> u64 {
        self.reported_distance.saturating_add(self.link_metric)
    }
}

/// DUAL state for one destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualTopologyEntry {
    pub dest: NodeId,
    /// Neighbours currently offering a finite distance.
    pub reported: BTreeMap<NodeId, Reported>,
    /// `None` is infinite.
    pub feasible_distance: Option<u64>,
    pub distance: Option<u64>,
    pub successor: Option<NodeId>,
    pub state: DualState,
    pub outstanding_replies: BTreeSet<NodeId>,
    /// Neighbours whose queries we answer once passive again.
    pub reply_owed: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualTrigger {
    Update,
    LostNeighbor,
    Query,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DualAction {
    Install,
    StartDiffusing(BTreeSet<NodeId>),
    Unreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplyOutcome {
    None,
    InstallAndPassive,
    Stale,
}

impl DualTopologyEntry {
    pub fn new(dest: NodeId) -> Self {
        DualTopologyEntry {
            dest,
            reported: BTreeMap::new(),
            feasible_distance: None,
            distance: None,
            successor: None,
            state: DualState::Passive,
            outstanding_replies: BTreeSet::new(),
            reply_owed: BTreeSet::new(),
        }
    }

    /// Records a neighbour's distance; `None` withdraws it.
    pub fn set_reported(&mut self, n: NodeId, rd: Option<u64>, link_metric: u64) {
        match rd {
            Some(rd) => {
                self.reported.insert(
                    n,
                    Reported {
                        reported_distance: rd,
                        link_metric,
                    },
                );
            }
            None => {
                self.reported.remove(&n);
            }
        }
    }

    /// Lowest computed distance, ties to the lowest neighbour id.
    fn best(&self, only_feasible: bool) -> Option<(NodeId, u64)> {
        self.reported
            .iter()
            .filter(|(_, r)| !only_feasible || self.rd_feasible(r.reported_distance))
            .map(|(&n, r)| (r.computed(), n))
            .min()
            .map(|(d, n)| (n, d))
    }

    fn rd_feasible(&self, rd: u64) -> bool {
        self.feasible_distance.is_none_or(|fd| rd < fd)
    }

    /// Distance we advertise while active: what the old successor offers
    /// now, if anything.
    pub fn query_distance(&self) -> Option<u64> {
        self.successor
            .and_then(|s| self.reported.get(&s))
            .map(Reported::computed)
    }

    fn go_passive_with(&mut self, best: Option<(NodeId, u64)>) {
        self.state = DualState::Passive;
        self.outstanding_replies.clear();
        self.successor = best.map(|b| b.0);
        self.distance = best.map(|b| b.1);
        self.feasible_distance = self.distance;
    }
}

/// Feasibility condition: the neighbour's reported distance is strictly
/// below our feasible distance.
pub fn dual_feasibility_check(entry: &DualTopologyEntry, neighbor: NodeId) -> Result<bool, EigrpError> {
    let r = entry
        .reported
        .get(&neighbor)
        .ok_or(EigrpError::UnknownNeighbor(neighbor))?;
    Ok(entry.rd_feasible(r.reported_distance))
}

/// Local computation for a passive destination. Switches to the best
/// feasible neighbour when there is one; otherwise starts a diffusing
/// computation toward `neighbors`, or declares the destination unreachable
/// when there is nobody left to ask.
pub fn dual_route_computation(
    entry: &mut DualTopologyEntry,
    _trigger: DualTrigger,
    neighbors: &BTreeSet<NodeId>,
) -> Result<DualAction, EigrpError> {
    if entry.state == DualState::Active {
        return Err(EigrpError::Active(entry.dest));
    }
    if let Some((n, d)) = entry.best(true) {
        entry.successor = Some(n);
        entry.distance = Some(d);
        entry.feasible_distance = Some(entry.feasible_distance.map_or(d, |fd| fd.min(d)));
        return Ok(DualAction::Install);
    }
    if entry.distance.is_some() && !neighbors.is_empty() {
        entry.state = DualState::Active;
        entry.outstanding_replies = neighbors.clone();
        entry.distance = entry.query_distance();
        if entry.distance.is_none() {
            entry.successor = None;
        }
        return Ok(DualAction::StartDiffusing(neighbors.clone()));
    }
    entry.go_passive_with(None);
    Ok(DualAction::Unreachable)
}

/// Handles one reply of a diffusing computation. When the last outstanding
/// reply arrives the feasible distance is reset to the new best distance.
pub fn dual_process_reply(
    entry: &mut DualTopologyEntry,
    replying_neighbor: NodeId,
    reply_rd: Option<u64>,
    link_metric: u64,
) -> ReplyOutcome {
    if entry.state == DualState::Passive || !entry.outstanding_replies.contains(&replying_neighbor) {
        return ReplyOutcome::Stale;
    }
    entry.set_reported(replying_neighbor, reply_rd, link_metric);
    entry.outstanding_replies.remove(&replying_neighbor);
    if !entry.outstanding_replies.is_empty() {
        return ReplyOutcome::None;
    }
    let best = entry.best(false);
    entry.go_passive_with(best);
    ReplyOutcome::InstallAndPassive
}

/// One router's EIGRP instance.
pub struct EigrpEngine {
    cfg: EigrpConfig,
    me: NodeId,
    neighbors: Neighbors,
    topology: BTreeMap<NodeId, DualTopologyEntry>,
    /// Directly attached hosts: (interface, link metric).
    connected: BTreeMap<NodeId, (InterfaceId, u64)>,
    link_metrics: Vec<u64>,
    forwarding: ForwardingTable,
    malformed: u64,
    stale_replies: u64,
    active_episodes: u64,
}

#[derive(Default)]
struct Pending {
    updates: Vec<RouteAd>,
    queries: Vec<RouteAd>,
    replies: BTreeMap<NodeId, Vec<RouteAd>>,
}

impl EigrpEngine {
    pub fn new(cfg: EigrpConfig, me: NodeId, ifaces: &[IfaceView]) -> Result<Self, EigrpError> {
        let link_metrics = ifaces
            .iter()
            .map(|i| cfg.link_metric(i.bandwidth_bps, i.prop_delay_us))
            .collect::<Result<Vec<_>, _>>()?;
        let mut engine = EigrpEngine {
            cfg,
            me,
            neighbors: Neighbors::new(),
            topology: BTreeMap::new(),
            connected: BTreeMap::new(),
            link_metrics,
            forwarding: ForwardingTable::new(),
            malformed: 0,
            stale_replies: 0,
            active_episodes: 0,
        };
        engine.connected = engine.connected_from(ifaces);
        engine.rebuild_forwarding();
        Ok(engine)
    }

    pub fn neighbors(&self) -> &Neighbors {
        &self.neighbors
    }

    pub fn topology(&self) -> &BTreeMap<NodeId, DualTopologyEntry> {
        &self.topology
    }

    pub fn stale_replies(&self) -> u64 {
        self.stale_replies
    }

    pub fn active_episodes(&self) -> u64 {
        self.active_episodes
    }

    pub fn is_active(&self) -> bool {
        self.topology.values().any(|e| e.state == DualState::Active)
    }

    fn connected_from(&self, ifaces: &[IfaceView]) -> BTreeMap<NodeId, (InterfaceId, u64)> {
        let mut out: BTreeMap<NodeId, (InterfaceId, u64)> = BTreeMap::new();
        for i in ifaces.iter().filter(|i| i.up) {
            let m = self.link_metrics[i.id.index()];
            for &h in &i.hosts {
                out.entry(h)
                    .and_modify(|e| {
                        if (m, i.id) < (e.1, e.0) {
                            *e = (i.id, m)
                        }
                    })
                    .or_insert((i.id, m));
            }
        }
        out
    }

    fn my_distance(&self, dest: NodeId) -> Option<u64> {
        if let Some(&(_, m)) = self.connected.get(&dest) {
            return Some(m);
        }
        self.topology.get(&dest).and_then(|e| e.distance)
    }

    fn full_table(&self) -> Vec<RouteAd> {
        let mut dests: BTreeSet<NodeId> = self.connected.keys().copied().collect();
        dests.extend(
            self.topology
                .values()
                .filter(|e| e.distance.is_some())
                .map(|e| e.dest),
        );
        dests.into_iter().map(|d| (d, self.my_distance(d))).collect()
    }

    fn neighbor_link_metric(&self, n: NodeId) -> Option<u64> {
        self.neighbors
            .get(n)
            .map(|e| self.link_metrics[e.interface.index()])
    }

    fn rebuild_forwarding(&mut self) {
        let connected = self.connected.iter().map(|(&h, &(iface, m))| {
            (
                h,
                Route {
                    next_hop: h,
                    iface,
                    metric: m,
                },
            )
        });
        let learned = self
            .topology
            .values()
            .filter(|e| !self.connected.contains_key(&e.dest))
            .filter_map(|e| {
                let succ = e.successor?;
                let dist = e.distance?;
                let iface = self.neighbors.get(succ)?.interface;
                Some((
                    e.dest,
                    Route {
                        next_hop: succ,
                        iface,
                        metric: dist,
                    },
                ))
            });
        self.forwarding = connected.chain(learned).collect();
    }

    /// Runs DUAL for a passive destination after its inputs changed and
    /// queues whatever messages the outcome requires.
    fn recompute(&mut self, dest: NodeId, trigger: DualTrigger, pending: &mut Pending) {
        if self.connected.contains_key(&dest) {
            return;
        }
        let neighbors = self.neighbors.ids();
        let Some(entry) = self.topology.get_mut(&dest) else {
            return;
        };
        if entry.state == DualState::Active {
            return;
        }
        let before = entry.distance;
        let action = dual_route_computation(entry, trigger, &neighbors)
            .expect("entry checked passive above");
        match action {
            DualAction::StartDiffusing(_) => {
                self.active_episodes += 1;
                pending.queries.push((dest, entry.distance));
            }
            DualAction::Install | DualAction::Unreachable => {
                if entry.distance != before {
                    pending.updates.push((dest, entry.distance));
                }
            }
        }
    }

    fn finish_passive(&mut self, dest: NodeId, before: Option<u64>, pending: &mut Pending) {
        let Some(entry) = self.topology.get_mut(&dest) else {
            return;
        };
        let owed = std::mem::take(&mut entry.reply_owed);
        let dist = self.my_distance(dest);
        for n in owed {
            pending.replies.entry(n).or_default().push((dest, dist));
        }
        if dist != before {
            pending.updates.push((dest, dist));
        }
    }

    fn flush(&mut self, ctx: &mut EngineCtx<'_>, pending: Pending) {
        let routed: Vec<InterfaceId> = ctx.routed_ifaces().map(|i| i.id).collect();
        if !pending.updates.is_empty() {
            for &iface in &routed {
                ctx.send(
                    iface,
                    None,
                    ControlMessage::Eigrp(EigrpMessage::Update(pending.updates.clone())),
                );
            }
        }
        if !pending.queries.is_empty() {
            for &iface in &routed {
                ctx.send(
                    iface,
                    None,
                    ControlMessage::Eigrp(EigrpMessage::Query(pending.queries.clone())),
                );
            }
        }
        for (n, routes) in pending.replies {
            if let Some(e) = self.neighbors.get(n) {
                ctx.send(
                    e.interface,
                    Some(n),
                    ControlMessage::Eigrp(EigrpMessage::Reply(routes)),
                );
            }
        }
        self.rebuild_forwarding();
    }

    fn neighbor_found(&mut self, ctx: &mut EngineCtx<'_>, n: NodeId) {
        let iface = self.neighbors.get(n).expect("just inserted").interface;
        let table = self.full_table();
        if !table.is_empty() {
            ctx.send(iface, Some(n), ControlMessage::Eigrp(EigrpMessage::Update(table)));
        }
    }

    fn neighbor_lost(&mut self, n: NodeId, pending: &mut Pending) {
        let dests: Vec<NodeId> = self.topology.keys().copied().collect();
        for dest in dests {
            let entry = self.topology.get_mut(&dest).expect("key from map");
            entry.reply_owed.remove(&n);
            match entry.state {
                DualState::Active => {
                    let before = entry.distance;
                    if entry.outstanding_replies.contains(&n) {
                        if dual_process_reply(entry, n, None, 0) == ReplyOutcome::InstallAndPassive {
                            self.finish_passive(dest, before, pending);
                        }
                    } else {
                        entry.reported.remove(&n);
                    }
                }
                DualState::Passive => {
                    if entry.reported.remove(&n).is_some() || entry.successor == Some(n) {
                        self.recompute(dest, DualTrigger::LostNeighbor, pending);
                    }
                }
            }
        }
    }

    fn handle_routes(
        &mut self,
        from: NodeId,
        kind: &EigrpMessage,
        routes: &[RouteAd],
        pending: &mut Pending,
    ) {
        let Some(link) = self.neighbor_link_metric(from) else {
            return;
        };
        for &(dest, rd) in routes {
            if dest == self.me {
                continue;
            }
            let entry = self
                .topology
                .entry(dest)
                .or_insert_with(|| DualTopologyEntry::new(dest));
            if self.connected.contains_key(&dest) {
                // Kept for when the attachment goes away.
                if entry.state == DualState::Passive {
                    entry.set_reported(from, rd, link);
                }
                if matches!(kind, EigrpMessage::Query(_)) {
                    pending.replies.entry(from).or_default().push((dest, self.my_distance(dest)));
                }
                continue;
            }
            match kind {
                EigrpMessage::Reply(_) => {
                    let before = entry.distance;
                    match dual_process_reply(entry, from, rd, link) {
                        ReplyOutcome::InstallAndPassive => self.finish_passive(dest, before, pending),
                        ReplyOutcome::Stale => {
                            self.stale_replies += 1;
                            if entry.state == DualState::Passive {
                                entry.set_reported(from, rd, link);
                                self.recompute(dest, DualTrigger::Update, pending);
                            }
                        }
                        ReplyOutcome::None => {}
                    }
                }
                EigrpMessage::Update(_) => {
                    entry.set_reported(from, rd, link);
                    if entry.state == DualState::Passive {
                        self.recompute(dest, DualTrigger::Update, pending);
                    }
                }
                EigrpMessage::Query(_) => {
                    entry.set_reported(from, rd, link);
                    if entry.state == DualState::Active {
                        let d = entry.distance;
                        pending.replies.entry(from).or_default().push((dest, d));
                        continue;
                    }
                    self.recompute(dest, DualTrigger::Query, pending);
                    let entry = &mut self.topology.get_mut(&dest).expect("present");
                    if entry.state == DualState::Active {
                        entry.reply_owed.insert(from);
                    } else {
                        let d = entry.distance;
                        pending.replies.entry(from).or_default().push((dest, d));
                    }
                }
                EigrpMessage::Hello => {}
            }
        }
    }

    fn refresh_connected(&mut self, ctx: &EngineCtx<'_>, pending: &mut Pending) {
        let now = self.connected_from(ctx.ifaces);
        let mut changed: BTreeSet<NodeId> = BTreeSet::new();
        for (h, v) in &now {
            if self.connected.get(h).map(|x| x.1) != Some(v.1) {
                changed.insert(*h);
            }
        }
        for h in self.connected.keys() {
            if !now.contains_key(h) {
                changed.insert(*h);
            }
        }
        let old = std::mem::replace(&mut self.connected, now);
        for h in changed {
            match self.connected.get(&h) {
                Some(&(_, m)) => pending.updates.push((h, Some(m))),
                None => {
                    // Lost attachment: the old metric is the feasible
                    // distance and DUAL decides from neighbour reports.
                    let m = old[&h].1;
                    let entry = self.topology.entry(h).or_insert_with(|| DualTopologyEntry::new(h));
                    if entry.state == DualState::Passive {
                        entry.feasible_distance = Some(m);
                        entry.distance = Some(m);
                        entry.successor = None;
                        self.recompute(h, DualTrigger::LostNeighbor, pending);
                    }
                }
            }
        }
    }
}

impl RoutingEngine for EigrpEngine {
    fn on_tick(&mut self, ctx: &mut EngineCtx<'_>) {
        let mut pending = Pending::default();
        let changes = self.neighbors.tick(&self.cfg, ctx.now);
        for n in changes.lost {
            self.neighbor_lost(n, &mut pending);
        }
        if ctx.now.secs().is_multiple_of(self.cfg.hello_interval) {
            let ifaces: Vec<InterfaceId> = ctx.routed_ifaces().map(|i| i.id).collect();
            for iface in ifaces {
                ctx.send(iface, None, ControlMessage::Eigrp(EigrpMessage::Hello));
            }
        }
        self.flush(ctx, pending);
    }

    fn on_message(
        &mut self,
        ctx: &mut EngineCtx<'_>,
        iface: InterfaceId,
        from: NodeId,
        msg: &ControlMessage,
    ) {
        let ControlMessage::Eigrp(msg) = msg else {
            self.malformed += 1;
            return;
        };
        if !ctx.is_peer(iface, from) {
            self.malformed += 1;
            return;
        }
        let changes = self.neighbors.heard(iface, from, ctx.now);
        for n in changes.found {
            self.neighbor_found(ctx, n);
        }
        let mut pending = Pending::default();
        match msg {
            EigrpMessage::Hello => {}
            EigrpMessage::Update(r) | EigrpMessage::Query(r) | EigrpMessage::Reply(r) => {
                self.handle_routes(from, msg, r, &mut pending)
            }
        }
        self.flush(ctx, pending);
    }

    fn on_interface_change(&mut self, ctx: &mut EngineCtx<'_>, iface: InterfaceId, up: bool) {
        let mut pending = Pending::default();
        if !up {
            for n in self.neighbors.interface_down(iface).lost {
                self.neighbor_lost(n, &mut pending);
            }
        }
        self.refresh_connected(ctx, &mut pending);
        self.flush(ctx, pending);
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
