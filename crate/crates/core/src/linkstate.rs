//! Link-state routing shared by the OSPF and IS-IS flavours: hello-based
//! adjacencies, sequence-numbered LSP flooding, a per-router link-state
//! database and Dijkstra-computed forwarding.
//!
//! The two flavours run the same machinery and differ only in timer
//! defaults (see [`LsFlavorConfig::ospf`] and [`LsFlavorConfig::isis`]).

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::engine::{ControlMessage, EngineCtx, IfaceView, RoutingEngine};
use crate::graph::{dijkstra, Dist, Graph};
use crate::table::{ForwardingTable, Route};
use crate::types::{InterfaceId, NodeId, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LsFlavor {
    Ospf,
    Isis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LsFlavorConfig {
    pub flavor: LsFlavor,
    pub hello_interval: u64,
    pub dead_interval: u64,
    /// Hold-down between an LSDB change and the SPF run it triggers.
    pub spf_delay: u64,
    pub lsp_refresh: u64,
    pub cost_reference_bandwidth: u64,
}

impl LsFlavorConfig {
    pub fn ospf() -> Self {
        LsFlavorConfig {
            flavor: LsFlavor::Ospf,
            hello_interval: 10,
            dead_interval: 40,
            spf_delay: 5,
            lsp_refresh: 1800,
            cost_reference_bandwidth: 100_000_000,
        }
    }

    pub fn isis() -> Self {
        LsFlavorConfig {
            flavor: LsFlavor::Isis,
            hello_interval: 10,
            dead_interval: 30,
            spf_delay: 1,
            lsp_refresh: 900,
            cost_reference_bandwidth: 100_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), LsError> {
        if self.hello_interval == 0 || self.dead_interval < 2 * self.hello_interval {
            return Err(LsError::BadConfig("dead interval must be at least twice the hello interval"));
        }
        if self.lsp_refresh == 0 {
            return Err(LsError::BadConfig("lsp refresh must be positive"));
        }
        Ok(())
    }

    /// Interface cost from bandwidth, never below 1.
    pub fn link_cost(&self, bandwidth_bps: u64) -> u64 {
        (self.cost_reference_bandwidth / bandwidth_bps.max(1)).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LsError {
    #[error("hello from {0}, which is not attached to the receiving interface")]
    NotConnected(NodeId),
    #[error("invalid config: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LsHello {
    pub sender: NodeId,
    /// Routers the sender has heard hellos from on this segment.
    pub heard: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lsp {
    pub origin: NodeId,
    pub seq: u64,
    /// Router neighbours with an Up adjacency, and the origin's cost to them.
    pub links: Vec<(NodeId, u64)>,
    /// Directly attached hosts and the cost to reach them.
    pub stubs: Vec<(NodeId, u64)>,
    pub age_created: SimTime,
}

impl Lsp {
    pub fn lists(&self, neighbor: NodeId) -> bool {
        self.links.iter().any(|&(n, _)| n == neighbor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AdjState {
    Down,
    Init,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adjacency {
    pub neighbor: NodeId,
    pub state: AdjState,
    pub last_hello: SimTime,
}

/// Adjacencies keyed by (interface, neighbour).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjacencies {
    map: BTreeMap<(InterfaceId, NodeId), Adjacency>,
}

impl Adjacencies {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, iface: InterfaceId, neighbor: NodeId) -> Option<&Adjacency> {
        self.map.get(&(iface, neighbor))
    }

    pub fn state(&self, iface: InterfaceId, neighbor: NodeId) -> AdjState {
        self.get(iface, neighbor).map_or(AdjState::Down, |a| a.state)
    }

    /// Neighbours heard on `iface` (Init or Up), for inclusion in our hellos.
    pub fn heard_on(&self, iface: InterfaceId) -> Vec<NodeId> {
        self.map
            .range((iface, NodeId(0))..=(iface, NodeId(u32::MAX)))
            .filter(|(_, a)| a.state != AdjState::Down)
            .map(|(&(_, n), _)| n)
            .collect()
    }

    pub fn up(&self) -> impl Iterator<Item = (InterfaceId, NodeId)> + '_ {
        self.map
            .iter()
            .filter(|(_, a)| a.state == AdjState::Up)
            .map(|(&k, _)| k)
    }

    fn up_set(&self) -> BTreeSet<(InterfaceId, NodeId)> {
        self.up().collect()
    }

    fn set_state(&mut self, key: (InterfaceId, NodeId), state: AdjState) -> bool {
        match self.map.get_mut(&key) {
            Some(a) if a.state != state => {
                a.state = state;
                true
            }
            _ => false,
        }
    }

    /// Hello processing. Returns whether any adjacency changed state.
    /// Unknown senders start in Init; a hello that lists us brings the
    /// adjacency Up; one that stops listing us drops it back to Init.
    pub fn process_hello(
        &mut self,
        iface: InterfaceId,
        peers: &[NodeId],
        me: NodeId,
        hello: &LsHello,
        now: SimTime,
    ) -> Result<bool, LsError> {
        if !peers.contains(&hello.sender) {
            return Err(LsError::NotConnected(hello.sender));
        }
        let key = (iface, hello.sender);
        let two_way = hello.heard.contains(&me);
        let target = if two_way { AdjState::Up } else { AdjState::Init };
        let adj = self.map.entry(key).or_insert(Adjacency {
            neighbor: hello.sender,
            state: AdjState::Down,
            last_hello: now,
        });
        adj.last_hello = now;
        let changed = adj.state != target;
        adj.state = target;
        Ok(changed)
    }

    /// Clock tick: adjacencies silent for `dead_interval` go Down.
    pub fn tick(&mut self, cfg: &LsFlavorConfig, now: SimTime) -> bool {
        let dead = SimTime::from_secs(cfg.dead_interval).as_micros();
        let mut changed = false;
        for a in self.map.values_mut() {
            if a.state != AdjState::Down && now - a.last_hello >= dead {
                a.state = AdjState::Down;
                changed = true;
            }
        }
        changed
    }

    /// Carrier loss tears down every adjacency on the interface at once.
    pub fn interface_down(&mut self, iface: InterfaceId) -> bool {
        let keys: Vec<_> = self
            .map
            .keys()
            .filter(|(i, _)| *i == iface)
            .copied()
            .collect();
        keys.into_iter()
            .fold(false, |acc, k| self.set_state(k, AdjState::Down) | acc)
    }
}

/// Builds the router's next LSP from its Up adjacencies and attached hosts.
/// `iface_cost` gives the cost of sending out of each interface.
pub fn originate_lsp(
    me: NodeId,
    prev_seq: u64,
    adjacencies: &Adjacencies,
    iface_cost: &BTreeMap<InterfaceId, u64>,
    stubs: &[(NodeId, u64)],
    now: SimTime,
) -> Lsp {
    let mut links: BTreeMap<NodeId, u64> = BTreeMap::new();
    for (iface, n) in adjacencies.up() {
        let c = iface_cost.get(&iface).copied().unwrap_or(1);
        links.entry(n).and_modify(|v| *v = (*v).min(c)).or_insert(c);
    }
    let mut stub_map: BTreeMap<NodeId, u64> = BTreeMap::new();
    for &(h, c) in stubs {
        stub_map.entry(h).and_modify(|v| *v = (*v).min(c)).or_insert(c);
    }
    Lsp {
        origin: me,
        seq: prev_seq + 1,
        links: links.into_iter().collect(),
        stubs: stub_map.into_iter().collect(),
        age_created: now,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FloodOutcome {
    pub accepted: bool,
    pub forward_on: Vec<InterfaceId>,
}

/// The newest LSP from every origin.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lsdb {
    entries: BTreeMap<NodeId, Lsp>,
}

impl Lsdb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, origin: NodeId) -> Option<&Lsp> {
        self.entries.get(&origin)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Lsp> {
        self.entries.values()
    }

    /// Stores `lsp` if it is newer than what we hold and reports where to
    /// pass it on: every up interface except the one it came in on.
    /// Stale or duplicate copies are neither stored nor forwarded.
    pub fn flood(
        &mut self,
        lsp: &Lsp,
        in_interface: Option<InterfaceId>,
        up_interfaces: &[InterfaceId],
    ) -> FloodOutcome {
        let newer = self
            .entries
            .get(&lsp.origin)
            .is_none_or(|stored| lsp.seq > stored.seq);
        if !newer {
            return FloodOutcome::default();
        }
        self.entries.insert(lsp.origin, lsp.clone());
        FloodOutcome {
            accepted: true,
            forward_on: up_interfaces
                .iter()
                .copied()
                .filter(|&i| Some(i) != in_interface)
                .collect(),
        }
    }

    /// Topology graph using only router links both ends advertise, plus
    /// one-way edges to attached hosts.
    pub fn to_graph(&self) -> Graph {
        let mut g = Graph::new();
        let mut edges: BTreeMap<(NodeId, NodeId), u64> = BTreeMap::new();
        for lsp in self.entries.values() {
            g.add_node(lsp.origin);
            for &(n, c) in &lsp.links {
                if self.entries.get(&n).is_some_and(|other| other.lists(lsp.origin)) {
                    let e = edges.entry((lsp.origin, n)).or_insert(c);
                    *e = (*e).min(c);
                }
            }
            for &(h, c) in &lsp.stubs {
                g.add_node(h);
                let e = edges.entry((lsp.origin, h)).or_insert(c);
                *e = (*e).min(c);
            }
        }
        for (&(a, b), &c) in &edges {
            g.add_node(b);
            g.add_edge(a, b, c as i64).expect("edges are deduplicated");
        }
        g
    }
}

/// Shortest-path tree from `me` over the LSDB, turned into first hops.
/// `hop_iface` maps a first-hop neighbour (router or attached host) to the
/// interface used to reach it; destinations whose first hop has no
/// interface are left out.
pub fn compute_forwarding(
    lsdb: &Lsdb,
    me: NodeId,
    hop_iface: &BTreeMap<NodeId, InterfaceId>,
) -> ForwardingTable {
    let graph = lsdb.to_graph();
    if !graph.contains(me) {
        return ForwardingTable::new();
    }
    let spt = dijkstra(&graph, me).expect("link costs are non-negative");
    spt.distances()
        .iter()
        .filter(|&(&d, _)| d != me)
        .filter_map(|(&d, &dist)| {
            let Dist::Finite(cost) = dist else { return None };
            let hop = spt.first_hop(d)?;
            let iface = *hop_iface.get(&hop)?;
            Some((
                d,
                Route {
                    next_hop: hop,
                    iface,
                    metric: cost as u64,
                },
            ))
        })
        .collect()
}

/// One router's link-state protocol instance.
pub struct LinkStateEngine {
    cfg: LsFlavorConfig,
    me: NodeId,
    adjacencies: Adjacencies,
    lsdb: Lsdb,
    seq: u64,
    last_origination: Option<u64>,
    spf_due: Option<u64>,
    spf_runs: u64,
    forwarding: ForwardingTable,
    malformed: u64,
}

impl LinkStateEngine {
    pub fn new(cfg: LsFlavorConfig, me: NodeId) -> Self {
        LinkStateEngine {
            cfg,
            me,
            adjacencies: Adjacencies::new(),
            lsdb: Lsdb::new(),
            seq: 0,
            last_origination: None,
            spf_due: None,
            spf_runs: 0,
            forwarding: ForwardingTable::new(),
            malformed: 0,
        }
    }

    pub fn config(&self) -> &LsFlavorConfig {
        &self.cfg
    }

    pub fn lsdb(&self) -> &Lsdb {
        &self.lsdb
    }

    pub fn adjacencies(&self) -> &Adjacencies {
        &self.adjacencies
    }

    pub fn spf_runs(&self) -> u64 {
        self.spf_runs
    }

    /// True while an LSDB change is waiting for its SPF run.
    pub fn spf_pending(&self) -> bool {
        self.spf_due.is_some()
    }

    fn iface_costs(&self, ifaces: &[IfaceView]) -> BTreeMap<InterfaceId, u64> {
        ifaces
            .iter()
            .map(|i| (i.id, self.cfg.link_cost(i.bandwidth_bps)))
            .collect()
    }

    fn stubs(&self, ifaces: &[IfaceView]) -> Vec<(NodeId, u64)> {
        ifaces
            .iter()
            .filter(|i| i.up)
            .flat_map(|i| {
                let c = self.cfg.link_cost(i.bandwidth_bps);
                i.hosts.iter().map(move |&h| (h, c))
            })
            .collect()
    }

    fn originate(&mut self, ctx: &mut EngineCtx<'_>) {
        let costs = self.iface_costs(ctx.ifaces);
        let stubs = self.stubs(ctx.ifaces);
        let lsp = originate_lsp(self.me, self.seq, &self.adjacencies, &costs, &stubs, ctx.now);
        self.seq = lsp.seq;
        self.last_origination = Some(ctx.now.secs());
        self.flood(ctx, lsp, None);
    }

    fn flood(&mut self, ctx: &mut EngineCtx<'_>, lsp: Lsp, in_iface: Option<InterfaceId>) {
        let up: Vec<InterfaceId> = ctx.routed_ifaces().map(|i| i.id).collect();
        let out = self.lsdb.flood(&lsp, in_iface, &up);
        if !out.accepted {
            return;
        }
        for iface in out.forward_on {
            ctx.send(iface, None, ControlMessage::Lsp(lsp.clone()));
        }
        self.schedule_spf(ctx);
    }

    fn schedule_spf(&mut self, ctx: &mut EngineCtx<'_>) {
        if self.cfg.spf_delay == 0 {
            self.run_spf(ctx);
        } else if self.spf_due.is_none() {
            self.spf_due = Some(ctx.now.secs() + self.cfg.spf_delay);
        }
    }

    fn run_spf(&mut self, ctx: &EngineCtx<'_>) {
        let costs = self.iface_costs(ctx.ifaces);
        let mut hop_iface: BTreeMap<NodeId, (u64, InterfaceId)> = BTreeMap::new();
        for (iface, n) in self.adjacencies.up() {
            let key = (costs[&iface], iface);
            hop_iface.entry(n).and_modify(|k| *k = (*k).min(key)).or_insert(key);
        }
        for i in ctx.ifaces.iter().filter(|i| i.up) {
            for &h in &i.hosts {
                let key = (costs[&i.id], i.id);
                hop_iface.entry(h).and_modify(|k| *k = (*k).min(key)).or_insert(key);
            }
        }
        let hop_iface = hop_iface.into_iter().map(|(n, (_, i))| (n, i)).collect();
        self.forwarding = compute_forwarding(&self.lsdb, self.me, &hop_iface);
        self.spf_due = None;
        self.spf_runs += 1;
    }

    /// Sends our whole database to a neighbour that just came Up.
    fn sync_database(&self, ctx: &mut EngineCtx<'_>, iface: InterfaceId, neighbor: NodeId) {
        for lsp in self.lsdb.iter() {
            ctx.send(iface, Some(neighbor), ControlMessage::Lsp(lsp.clone()));
        }
    }

    fn after_adjacency_change(
        &mut self,
        ctx: &mut EngineCtx<'_>,
        before: BTreeSet<(InterfaceId, NodeId)>,
    ) {
        let after = self.adjacencies.up_set();
        if before == after {
            return;
        }
        self.originate(ctx);
        for &(iface, n) in after.difference(&before) {
            self.sync_database(ctx, iface, n);
        }
    }
}

impl RoutingEngine for LinkStateEngine {
    fn on_tick(&mut self, ctx: &mut EngineCtx<'_>) {
        let now_s = ctx.now.secs();
        if self.last_origination.is_none() {
            self.originate(ctx);
        }
        let before = self.adjacencies.up_set();
        if self.adjacencies.tick(&self.cfg, ctx.now) {
            self.after_adjacency_change(ctx, before);
        }
        if now_s.is_multiple_of(self.cfg.hello_interval) {
            let ifaces: Vec<InterfaceId> = ctx.routed_ifaces().map(|i| i.id).collect();
            for iface in ifaces {
                let hello = LsHello {
                    sender: self.me,
                    heard: self.adjacencies.heard_on(iface),
                };
                ctx.send(iface, None, ControlMessage::LsHello(hello));
            }
        }
        if self
            .last_origination
            .is_some_and(|t| now_s - t >= self.cfg.lsp_refresh)
        {
            self.originate(ctx);
        }
        if self.spf_due.is_some_and(|due| now_s >= due) {
            self.run_spf(ctx);
        }
    }

    fn on_message(
        &mut self,
        ctx: &mut EngineCtx<'_>,
        iface: InterfaceId,
        from: NodeId,
        msg: &ControlMessage,
    ) {
        match msg {
            ControlMessage::LsHello(hello) => {
                let peers = ctx.iface(iface).map(|i| i.peers.clone()).unwrap_or_default();
                if hello.sender != from {
                    self.malformed += 1;
                    return;
                }
                let before = self.adjacencies.up_set();
                match self
                    .adjacencies
                    .process_hello(iface, &peers, self.me, hello, ctx.now)
                {
                    Ok(true) => self.after_adjacency_change(ctx, before),
                    Ok(false) => {}
                    Err(_) => self.malformed += 1,
                }
            }
            ControlMessage::Lsp(lsp) => {
                if !ctx.is_peer(iface, from) {
                    self.malformed += 1;
                    return;
                }
                if lsp.origin != self.me {
                    self.flood(ctx, lsp.clone(), Some(iface));
                }
            }
            _ => self.malformed += 1,
        }
    }

    fn on_interface_change(&mut self, ctx: &mut EngineCtx<'_>, iface: InterfaceId, up: bool) {
        if up {
            return;
        }
        let before = self.adjacencies.up_set();
        if self.adjacencies.interface_down(iface) {
            self.after_adjacency_change(ctx, before);
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
