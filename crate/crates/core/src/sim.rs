//! Discrete-event kernel: links with FIFO transmit queues, host, switch and
//! router forwarding, failure injection and constant-rate traffic.
//!
//! A run is single-threaded and fully deterministic: every ordering
//! decision goes through the event queue's (time, seq) order or through
//! `NodeId` order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::eigrp::{EigrpConfig, EigrpEngine};
use crate::engine::{sizes, ControlMessage, EngineCtx, IfaceView, Outgoing, RoutingEngine};
use crate::eventq::EventQueue;
use crate::linkstate::{LinkStateEngine, LsFlavorConfig};
use crate::metrics::{MetricEvent, MetricSeries};
use crate::rip::{RipConfig, RipEngine};
use crate::scenario::{LinkSpec, LinkStatus, NodeKind, Scenario, ValidationError};
use crate::table::ForwardingTable;
use crate::types::{InterfaceId, NodeId, Protocol, SimTime, MICROS_PER_SEC};

pub const DEFAULT_TTL: u32 = 32;
pub const DEFAULT_QUEUE_CAPACITY: usize = 64;

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Frames waiting or being serialized, per link direction.
    pub queue_capacity: usize,
    pub initial_ttl: u32,
    /// Router per-packet forwarding latency.
    pub processing_delay_us: u64,
    pub record_trace: bool,
    pub rip: RipConfig,
    pub ospf: LsFlavorConfig,
    pub isis: LsFlavorConfig,
    pub eigrp: EigrpConfig,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            queue_capacity: DEFAULT_QUEUE_CAPACITY,
            initial_ttl: DEFAULT_TTL,
            processing_delay_us: 0,
            record_trace: false,
            rip: RipConfig::default(),
            ospf: LsFlavorConfig::ospf(),
            isis: LsFlavorConfig::isis(),
            eigrp: EigrpConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(#[from] ValidationError),
    #[error("protocol configuration: {0}")]
    Engine(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DropReason {
    NoRoute,
    TtlExpired,
    LinkDown,
    Congestion,
    /// Every copy was discarded by address filtering.
    Unreachable,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::NoRoute,
        DropReason::TtlExpired,
        DropReason::LinkDown,
        DropReason::Congestion,
        DropReason::Unreachable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoRoute => "no_route",
            DropReason::TtlExpired => "ttl",
            DropReason::LinkDown => "link_down",
            DropReason::Congestion => "congestion",
            DropReason::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub flow_id: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub size_bits: u64,
    pub created_at: SimTime,
    pub hops_traversed: u32,
    pub ttl: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L2Dst {
    Node(NodeId),
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Data(Packet),
    Control(ControlMessage),
    /// One-off host announcement so switches learn host locations.
    Announce,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub l2_src: NodeId,
    pub l2_dst: L2Dst,
    pub payload: Payload,
}

impl Frame {
    pub fn size_bits(&self) -> u64 {
        match &self.payload {
            Payload::Data(p) => p.size_bits,
            Payload::Control(m) => m.size_bits(),
            Payload::Announce => sizes::HELLO,
        }
    }

    fn data_id(&self) -> Option<&Packet> {
        match &self.payload {
            Payload::Data(p) => Some(p),
            _ => None,
        }
    }
}

/// Time to clock `bits` onto a link, rounded up to whole microseconds.
pub fn serialization_us(bits: u64, bandwidth_bps: u64) -> u64 {
    (bits as u128 * MICROS_PER_SEC as u128).div_ceil(bandwidth_bps as u128) as u64
}

#[derive(Debug, Clone)]
struct InFlight {
    tx_end: SimTime,
    frame: Frame,
}

#[derive(Debug, Clone, Default)]
struct Direction {
    queue: VecDeque<InFlight>,
    busy_until: SimTime,
}

/// One bidirectional link. Direction 0 carries frames from `a` to `b`.
#[derive(Debug, Clone)]
pub struct Link {
    pub spec: LinkSpec,
    pub up: bool,
    /// Bumped on every failure so pending deliveries can be recognised as
    /// stale.
    pub epoch: u64,
    dirs: [Direction; 2],
}

impl Link {
    pub fn new(spec: LinkSpec) -> Self {
        Link {
            spec,
            up: true,
            epoch: 0,
            dirs: Default::default(),
        }
    }

    /// Frames queued or still being serialized in direction `dir`.
    pub fn occupancy(&self, dir: usize, now: SimTime) -> usize {
        self.dirs[dir].queue.iter().filter(|f| f.tx_end > now).count()
    }

    /// Queues a frame for transmission starting no earlier than `now`.
    /// Returns the arrival time at the far end.
    pub fn transmit(
        &mut self,
        dir: usize,
        frame: Frame,
        now: SimTime,
        capacity: usize,
    ) -> Result<SimTime, DropReason> {
        if !self.up {
            return Err(DropReason::LinkDown);
        }
        if self.occupancy(dir, now) >= capacity {
            return Err(DropReason::Congestion);
        }
        let d = &mut self.dirs[dir];
        let start = d.busy_until.max(now);
        let tx_end = start + serialization_us(frame.size_bits(), self.spec.bandwidth_bps);
        d.busy_until = tx_end;
        d.queue.push_back(InFlight { tx_end, frame });
        Ok(tx_end + self.spec.prop_delay_us)
    }

    /// Removes the frame whose delivery is due.
    fn deliver(&mut self, dir: usize) -> Option<Frame> {
        self.dirs[dir].queue.pop_front().map(|f| f.frame)
    }

    /// Sets the status; a failure flushes both queues and returns the lost
    /// frames.
    pub fn set_status(&mut self, up: bool, now: SimTime) -> Vec<Frame> {
        self.up = up;
        if up {
            return Vec::new();
        }
        self.epoch += 1;
        let mut lost = Vec::new();
        for d in &mut self.dirs {
            lost.extend(d.queue.drain(..).map(|f| f.frame));
            d.busy_until = now;
        }
        lost
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardAction {
    DeliverLocal,
    Enqueue { iface: InterfaceId, next_hop: NodeId },
    Drop(DropReason),
}

/// Router forwarding decision. Updates TTL and hop count on success.
pub fn forward_packet(table: &ForwardingTable, me: NodeId, packet: &mut Packet) -> ForwardAction {
    if packet.dst == me {
        return ForwardAction::DeliverLocal;
    }
    let Some(route) = table.get(packet.dst) else {
        return ForwardAction::Drop(DropReason::NoRoute);
    };
    if packet.ttl == 0 {
        return ForwardAction::Drop(DropReason::TtlExpired);
    }
    packet.ttl -= 1;
    packet.hops_traversed += 1;
    ForwardAction::Enqueue {
        iface: route.iface,
        next_hop: route.next_hop,
    }
}

/// Learning bridge table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SwitchTable {
    map: BTreeMap<NodeId, InterfaceId>,
}

impl SwitchTable {
    pub fn learn(&mut self, src: NodeId, iface: InterfaceId) {
        self.map.insert(src, iface);
    }

    pub fn lookup(&self, n: NodeId) -> Option<InterfaceId> {
        self.map.get(&n).copied()
    }

    pub fn forget_iface(&mut self, iface: InterfaceId) {
        self.map.retain(|_, i| *i != iface);
    }

    /// Output interfaces for a frame: the learned port, or every other up
    /// port when the destination is unknown or broadcast.
    pub fn decide(&self, dst: L2Dst, in_iface: InterfaceId, up: &[bool]) -> Vec<InterfaceId> {
        if let L2Dst::Node(n) = dst {
            if let Some(out) = self.lookup(n) {
                return if out == in_iface || !up[out.index()] {
                    Vec::new()
                } else {
                    vec![out]
                };
            }
        }
        (0..up.len() as u32)
            .map(InterfaceId)
            .filter(|&i| i != in_iface && up[i.index()])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    PacketArrival,
    TimerTick,
    LinkStatusChange,
    ProtocolMessageDelivery,
    PacketGeneration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEntry {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkEvent {
    pub time: SimTime,
    pub link: usize,
    pub status: LinkStatus,
    /// False when the link was already in the requested state.
    pub applied: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowStats {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KernelStats {
    pub generated: u64,
    pub delivered: u64,
    pub dropped: BTreeMap<DropReason, u64>,
    pub in_flight: u64,
    pub status_warnings: u64,
    pub table_changes: u64,
    pub control_messages: u64,
    pub control_bits: u64,
    pub per_flow: Vec<FlowStats>,
}

impl KernelStats {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Tick,
    Arrival {
        link: usize,
        dir: usize,
        epoch: u64,
        control: bool,
    },
    LinkStatus {
        link: usize,
        status: LinkStatus,
    },
    Generate {
        flow: usize,
        k: u64,
    },
}

impl Action {
    fn kind(&self) -> EventKind {
        match self {
            Action::Tick => EventKind::TimerTick,
            Action::Arrival { control: true, .. } => EventKind::ProtocolMessageDelivery,
            Action::Arrival { control: false, .. } => EventKind::PacketArrival,
            Action::LinkStatus { .. } => EventKind::LinkStatusChange,
            Action::Generate { .. } => EventKind::PacketGeneration,
        }
    }
}

/// Routers and hosts reachable through one interface without crossing
/// another router.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Segment {
    pub routers: Vec<NodeId>,
    pub hosts: Vec<NodeId>,
}

struct RouterState {
    engine: Box<dyn RoutingEngine>,
    views: Vec<IfaceView>,
    installed: ForwardingTable,
}

struct NodeRt {
    kind: NodeKind,
    /// Per interface: (link index, outgoing direction).
    ports: Vec<(usize, usize)>,
    segments: Vec<Segment>,
    router: Option<RouterState>,
    switch: SwitchTable,
}

#[derive(Debug, Clone, Copy)]
struct Track {
    flow: usize,
    live: u32,
    delivered: bool,
    last_drop: Option<DropReason>,
}

enum CopyEnd {
    Delivered,
    Dropped(DropReason),
    Filtered,
}

/// Result of following installed forwarding tables hop by hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Walk {
    /// Number of routers traversed.
    Reached(usize),
    NoRoute(NodeId),
    Loop(Vec<NodeId>),
}

pub struct Simulation {
    scenario: Scenario,
    opts: SimOptions,
    now: SimTime,
    end: SimTime,
    queue: EventQueue<Action>,
    nodes: Vec<NodeRt>,
    links: Vec<Link>,
    packets: BTreeMap<u64, Track>,
    next_packet_id: u64,
    metrics: MetricSeries,
    stats: KernelStats,
    trace: Vec<TraceEntry>,
    link_log: Vec<LinkEvent>,
}

impl Simulation {
    pub fn new(scenario: &Scenario, opts: SimOptions) -> Result<Simulation, SimError> {
        scenario.validate()?;
        let n = scenario.nodes.len();
        let links: Vec<Link> = scenario.links.iter().copied().map(Link::new).collect();
        let mut ports: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (i, l) in scenario.links.iter().enumerate() {
            ports[l.a.index()].push((i, 0));
            ports[l.b.index()].push((i, 1));
        }
        let far = |(link, dir): (usize, usize)| {
            let l = &scenario.links[link];
            if dir == 0 {
                l.b
            } else {
                l.a
            }
        };

        let mut nodes = Vec::with_capacity(n);
        for (i, spec) in scenario.nodes.iter().enumerate() {
            let me = NodeId(i as u32);
            let segments: Vec<Segment> = ports[i]
                .iter()
                .map(|&p| segment_behind(scenario, &ports, me, p, far))
                .collect();
            let router = if spec.kind == NodeKind::Router {
                let views: Vec<IfaceView> = ports[i]
                    .iter()
                    .zip(&segments)
                    .enumerate()
                    .map(|(k, (&(link, _), seg))| {
                        let l = &scenario.links[link];
                        IfaceView {
                            id: InterfaceId(k as u32),
                            up: true,
                            bandwidth_bps: l.bandwidth_bps,
                            prop_delay_us: l.prop_delay_us,
                            peers: seg.routers.clone(),
                            hosts: seg.hosts.clone(),
                        }
                    })
                    .collect();
                let engine = build_engine(scenario.protocol, &opts, me, &views)?;
                let installed = engine.forwarding().clone();
                Some(RouterState {
                    engine,
                    views,
                    installed,
                })
            } else {
                None
            };
            nodes.push(NodeRt {
                kind: spec.kind,
                ports: ports[i].clone(),
                segments,
                router,
                switch: SwitchTable::default(),
            });
        }

        let end = SimTime::from_secs(scenario.duration_s);
        let mut sim = Simulation {
            scenario: scenario.clone(),
            now: SimTime::ZERO,
            end,
            queue: EventQueue::new(),
            nodes,
            links,
            packets: BTreeMap::new(),
            next_packet_id: 0,
            metrics: MetricSeries::new(scenario.bucket_s, scenario.duration_s),
            stats: KernelStats {
                per_flow: vec![FlowStats::default(); scenario.flows.len()],
                ..Default::default()
            },
            trace: Vec::new(),
            link_log: Vec::new(),
            opts,
        };
        if end > SimTime::ZERO {
            sim.queue.push(SimTime::ZERO, Action::Tick);
        }
        for f in &scenario.failures {
            let link = scenario.link_index(f.a, f.b).expect("validated");
            sim.queue.push(
                SimTime::from_secs(f.time_s),
                Action::LinkStatus {
                    link,
                    status: f.status,
                },
            );
        }
        for (flow, f) in scenario.flows.iter().enumerate() {
            let t = SimTime::from_secs(f.start_s);
            if f.start_s < f.stop_s && t < end {
                sim.queue.push(t, Action::Generate { flow, k: 0 });
            }
        }
        if end > SimTime::ZERO {
            for h in scenario.host_ids().collect::<Vec<_>>() {
                for iface in 0..sim.nodes[h.index()].ports.len() {
                    let frame = Frame {
                        l2_src: h,
                        l2_dst: L2Dst::Broadcast,
                        payload: Payload::Announce,
                    };
                    sim.transmit(h, InterfaceId(iface as u32), frame, SimTime::ZERO);
                }
            }
        }
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn end_time(&self) -> SimTime {
        self.end
    }

    pub fn metrics(&self) -> &MetricSeries {
        &self.metrics
    }

    pub fn stats(&self) -> &KernelStats {
        &self.stats
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn link_log(&self) -> &[LinkEvent] {
        &self.link_log
    }

    pub fn link(&self, i: usize) -> &Link {
        &self.links[i]
    }

    pub fn segments(&self, node: NodeId) -> &[Segment] {
        &self.nodes[node.index()].segments
    }

    pub fn switch_table(&self, node: NodeId) -> &SwitchTable {
        &self.nodes[node.index()].switch
    }

    pub fn engine(&self, node: NodeId) -> Option<&dyn RoutingEngine> {
        self.nodes[node.index()]
            .router
            .as_ref()
            .map(|r| r.engine.as_ref())
    }

    pub fn forwarding(&self, node: NodeId) -> Option<&ForwardingTable> {
        self.engine(node).map(|e| e.forwarding())
    }

    /// Processes the next event before the end of the run. Returns false
    /// once nothing is left to do.
    pub fn step(&mut self) -> bool {
        match self.queue.peek_time() {
            Some(t) if t < self.end => {}
            _ => {
                self.finalize();
                return false;
            }
        }
        let ev = self.queue.pop().expect("peeked");
        self.now = ev.time;
        if self.opts.record_trace {
            self.trace.push(TraceEntry {
                time: ev.time,
                seq: ev.seq,
                kind: ev.payload.kind(),
            });
        }
        match ev.payload {
            Action::Tick => self.on_tick(),
            Action::Arrival {
                link, dir, epoch, ..
            } => self.on_arrival(link, dir, epoch),
            Action::LinkStatus { link, status } => self.apply_link_status_change(link, status),
            Action::Generate { flow, k } => self.generate(flow, k),
        }
        true
    }

    /// Runs every event strictly before `t`.
    pub fn run_until(&mut self, t: SimTime) {
        while self.queue.peek_time().is_some_and(|next| next < t && next < self.end) {
            self.step();
        }
    }

    pub fn run(&mut self) {
        while self.step() {}
    }

    fn finalize(&mut self) {
        self.now = self.end.max(self.now);
    }

    fn on_tick(&mut self) {
        for i in 0..self.nodes.len() {
            if self.nodes[i].router.is_some() {
                self.with_engine(i, |e, ctx| e.on_tick(ctx));
            }
        }
        let next = self.now + MICROS_PER_SEC;
        if next < self.end {
            self.queue.push(next, Action::Tick);
        }
    }

    fn with_engine(&mut self, node: usize, f: impl FnOnce(&mut dyn RoutingEngine, &mut EngineCtx<'_>)) {
        let now = self.now;
        let r = self.nodes[node].router.as_mut().expect("router node");
        let mut ctx = EngineCtx::new(now, NodeId(node as u32), &r.views);
        f(r.engine.as_mut(), &mut ctx);
        let out = ctx.take_outbox();
        if !r.engine.forwarding().same_forwarding(&r.installed) {
            r.installed = r.engine.forwarding().clone();
            self.stats.table_changes += 1;
            self.metrics.record(MetricEvent::TableChange, now);
        }
        for o in out {
            self.send_control(node, o);
        }
    }

    fn send_control(&mut self, node: usize, o: Outgoing) {
        let bits = o.msg.size_bits();
        let frame = Frame {
            l2_src: NodeId(node as u32),
            l2_dst: o.to.map_or(L2Dst::Broadcast, L2Dst::Node),
            payload: Payload::Control(o.msg),
        };
        if self.transmit(NodeId(node as u32), o.iface, frame, self.now) {
            self.stats.control_messages += 1;
            self.stats.control_bits += bits;
            self.metrics.record(MetricEvent::ControlBits(bits), self.now);
        }
    }

    /// Puts a frame on the link behind `iface`; returns whether the link
    /// accepted it.
    fn transmit(&mut self, node: NodeId, iface: InterfaceId, frame: Frame, at: SimTime) -> bool {
        let Some(&(link, dir)) = self.nodes[node.index()].ports.get(iface.index()) else {
            return false;
        };
        let control = matches!(frame.payload, Payload::Control(_));
        let data = frame.data_id().cloned();
        let l = &mut self.links[link];
        match l.transmit(dir, frame, at, self.opts.queue_capacity) {
            Ok(arrive) => {
                let epoch = l.epoch;
                self.queue.push(
                    arrive,
                    Action::Arrival {
                        link,
                        dir,
                        epoch,
                        control,
                    },
                );
                true
            }
            Err(reason) => {
                if let Some(p) = data {
                    self.copy_end(&p, CopyEnd::Dropped(reason));
                }
                false
            }
        }
    }

    fn on_arrival(&mut self, link: usize, dir: usize, epoch: u64) {
        let l = &mut self.links[link];
        if l.epoch != epoch {
            return;
        }
        let Some(frame) = l.deliver(dir) else {
            return;
        };
        let (to, _) = endpoint(&l.spec, dir);
        let iface = self.nodes[to.index()]
            .ports
            .iter()
            .position(|&(k, d)| k == link && d != dir)
            .expect("link attached to receiver");
        self.receive(to, InterfaceId(iface as u32), frame);
    }

    fn receive(&mut self, node: NodeId, iface: InterfaceId, frame: Frame) {
        match self.nodes[node.index()].kind {
            NodeKind::Switch => self.switch_receive(node, iface, frame),
            NodeKind::Host => {
                if let Payload::Data(p) = &frame.payload {
                    let end = if frame.l2_dst == L2Dst::Node(node) && p.dst == node {
                        CopyEnd::Delivered
                    } else {
                        CopyEnd::Filtered
                    };
                    self.copy_end(p, end);
                }
            }
            NodeKind::Router => self.router_receive(node, iface, frame),
        }
    }

    fn switch_receive(&mut self, node: NodeId, iface: InterfaceId, frame: Frame) {
        let up: Vec<bool> = self.nodes[node.index()]
            .ports
            .iter()
            .map(|&(l, _)| self.links[l].up)
            .collect();
        let sw = &mut self.nodes[node.index()].switch;
        sw.learn(frame.l2_src, iface);
        let outs = sw.decide(frame.l2_dst, iface, &up);
        if let Payload::Data(p) = &frame.payload {
            match outs.len() {
                0 => {
                    let p = p.clone();
                    self.copy_end(&p, CopyEnd::Filtered);
                    return;
                }
                n => self.packets.get_mut(&p.id).expect("tracked").live += n as u32 - 1,
            }
        }
        for out in outs {
            self.transmit(node, out, frame.clone(), self.now);
        }
    }

    fn router_receive(&mut self, node: NodeId, iface: InterfaceId, frame: Frame) {
        let addressed = match frame.l2_dst {
            L2Dst::Node(n) => n == node,
            L2Dst::Broadcast => true,
        };
        match frame.payload {
            Payload::Data(mut p) => {
                if !addressed {
                    self.copy_end(&p, CopyEnd::Filtered);
                    return;
                }
                let table = self.nodes[node.index()]
                    .router
                    .as_ref()
                    .expect("router")
                    .engine
                    .forwarding();
                match forward_packet(table, node, &mut p) {
                    ForwardAction::DeliverLocal => self.copy_end(&p, CopyEnd::Delivered),
                    ForwardAction::Drop(r) => self.copy_end(&p, CopyEnd::Dropped(r)),
                    ForwardAction::Enqueue { iface, next_hop } => {
                        let frame = Frame {
                            l2_src: node,
                            l2_dst: L2Dst::Node(next_hop),
                            payload: Payload::Data(p),
                        };
                        let at = self.now + self.opts.processing_delay_us;
                        self.transmit(node, iface, frame, at);
                    }
                }
            }
            Payload::Control(msg) => {
                if addressed {
                    let from = frame.l2_src;
                    self.with_engine(node.index(), |e, ctx| e.on_message(ctx, iface, from, &msg));
                }
            }
            Payload::Announce => {}
        }
    }

    fn copy_end(&mut self, p: &Packet, end: CopyEnd) {
        let now = self.now;
        let t = self.packets.get_mut(&p.id).expect("tracked packet");
        t.live -= 1;
        match end {
            CopyEnd::Delivered if !t.delivered => {
                t.delivered = true;
                self.stats.delivered += 1;
                self.stats.in_flight -= 1;
                self.stats.per_flow[t.flow].delivered += 1;
                self.stats.per_flow[t.flow].in_flight -= 1;
                self.metrics.record(
                    MetricEvent::Delivery {
                        delay_us: now - p.created_at,
                        hops: p.hops_traversed as u64,
                    },
                    now,
                );
            }
            CopyEnd::Delivered | CopyEnd::Filtered => {}
            CopyEnd::Dropped(r) => t.last_drop = Some(r),
        }
        if t.live == 0 {
            let t = self.packets.remove(&p.id).expect("present");
            if !t.delivered {
                let reason = t.last_drop.unwrap_or(DropReason::Unreachable);
                *self.stats.dropped.entry(reason).or_default() += 1;
                self.stats.in_flight -= 1;
                self.stats.per_flow[t.flow].dropped += 1;
                self.stats.per_flow[t.flow].in_flight -= 1;
                self.metrics.record(MetricEvent::Drop, now);
            }
        }
    }

    /// Applies a scheduled status change and notifies both ends.
    pub fn apply_link_status_change(&mut self, link: usize, status: LinkStatus) {
        let up = status == LinkStatus::Up;
        let applied = self.links[link].up != up;
        self.link_log.push(LinkEvent {
            time: self.now,
            link,
            status,
            applied,
        });
        if !applied {
            self.stats.status_warnings += 1;
            return;
        }
        let lost = self.links[link].set_status(up, self.now);
        for f in lost {
            if let Payload::Data(p) = f.payload {
                self.copy_end(&p, CopyEnd::Dropped(DropReason::LinkDown));
            }
        }
        let spec = self.links[link].spec;
        for (node, dir) in [(spec.a, 0), (spec.b, 1)] {
            let n = &mut self.nodes[node.index()];
            let iface = n
                .ports
                .iter()
                .position(|&p| p == (link, dir))
                .expect("attached");
            let iface = InterfaceId(iface as u32);
            if !up {
                n.switch.forget_iface(iface);
            }
            if let Some(r) = n.router.as_mut() {
                r.views[iface.index()].up = up;
                self.with_engine(node.index(), |e, ctx| e.on_interface_change(ctx, iface, up));
            }
        }
    }

    fn generate(&mut self, flow: usize, k: u64) {
        let f = self.scenario.flows[flow];
        let id = self.next_packet_id;
        self.next_packet_id += 1;
        let p = Packet {
            id,
            flow_id: flow,
            src: f.src,
            dst: f.dst,
            size_bits: f.packet_bits(),
            created_at: self.now,
            hops_traversed: 0,
            ttl: self.opts.initial_ttl,
        };
        self.stats.generated += 1;
        self.stats.in_flight += 1;
        self.stats.per_flow[flow].generated += 1;
        self.stats.per_flow[flow].in_flight += 1;
        self.packets.insert(
            id,
            Track {
                flow,
                live: 1,
                delivered: false,
                last_drop: None,
            },
        );
        self.host_send(p);

        let next = SimTime::from_secs(f.start_s) + (k + 1) * MICROS_PER_SEC / f.rate_pps;
        if next < SimTime::from_secs(f.stop_s) && next < self.end {
            self.queue.push(next, Action::Generate { flow, k: k + 1 });
        }
    }

    /// Sends directly when the destination shares a segment, otherwise via
    /// the attached router with the best current metric (lowest id on ties).
    fn host_send(&mut self, p: Packet) {
        let host = p.src;
        let segs = &self.nodes[host.index()].segments;
        let mut choice: Option<(InterfaceId, NodeId)> = segs
            .iter()
            .position(|s| s.hosts.contains(&p.dst))
            .map(|i| (InterfaceId(i as u32), p.dst));
        if choice.is_none() {
            let mut best: Option<(u64, NodeId, InterfaceId)> = None;
            for (i, s) in segs.iter().enumerate() {
                for &r in &s.routers {
                    let Some(route) = self.forwarding(r).and_then(|t| t.get(p.dst)) else {
                        continue;
                    };
                    let cand = (route.metric, r, InterfaceId(i as u32));
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
            choice = best.map(|(_, r, i)| (i, r));
        }
        let Some((iface, l2)) = choice else {
            self.copy_end(&p, CopyEnd::Dropped(DropReason::NoRoute));
            return;
        };
        let frame = Frame {
            l2_src: host,
            l2_dst: L2Dst::Node(l2),
            payload: Payload::Data(p),
        };
        self.transmit(host, iface, frame, self.now);
    }

    /// Follows installed tables from router `from` toward host `dst`.
    pub fn walk(&self, from: NodeId, dst: NodeId) -> Walk {
        let mut at = from;
        let mut seen = vec![from];
        loop {
            let Some(route) = self.forwarding(at).and_then(|t| t.get(dst)) else {
                return Walk::NoRoute(at);
            };
            if route.next_hop == dst {
                return Walk::Reached(seen.len());
            }
            at = route.next_hop;
            if seen.contains(&at) {
                seen.push(at);
                return Walk::Loop(seen);
            }
            seen.push(at);
        }
    }
}

fn endpoint(spec: &LinkSpec, dir: usize) -> (NodeId, NodeId) {
    if dir == 0 {
        (spec.b, spec.a)
    } else {
        (spec.a, spec.b)
    }
}

fn build_engine(
    protocol: Protocol,
    opts: &SimOptions,
    me: NodeId,
    views: &[IfaceView],
) -> Result<Box<dyn RoutingEngine>, SimError> {
    let e = |s: String| SimError::Engine(s);
    Ok(match protocol {
        Protocol::Rip => {
            opts.rip.validate().map_err(|x| e(x.to_string()))?;
            Box::new(RipEngine::new(opts.rip, views))
        }
        Protocol::Ospf | Protocol::Isis => {
            let cfg = if protocol == Protocol::Ospf {
                opts.ospf
            } else {
                opts.isis
            };
            cfg.validate().map_err(|x| e(x.to_string()))?;
            Box::new(LinkStateEngine::new(cfg, me))
        }
        Protocol::Eigrp => {
            opts.eigrp.validate().map_err(|x| e(x.to_string()))?;
            Box::new(EigrpEngine::new(opts.eigrp, me, views).map_err(|x| e(x.to_string()))?)
        }
    })
}

/// Routers and hosts behind port `start` of `me`, crossing only switches.
fn segment_behind(
    scenario: &Scenario,
    ports: &[Vec<(usize, usize)>],
    me: NodeId,
    start: (usize, usize),
    far: impl Fn((usize, usize)) -> NodeId,
) -> Segment {
    let mut seg = Segment::default();
    let mut seen: BTreeSet<NodeId> = BTreeSet::from([me]);
    let mut stack = vec![(far(start), start.0)];
    while let Some((n, via)) = stack.pop() {
        if !seen.insert(n) {
            continue;
        }
        match scenario.kind(n) {
            NodeKind::Router => seg.routers.push(n),
            NodeKind::Host => seg.hosts.push(n),
            NodeKind::Switch => {
                for &p in &ports[n.index()] {
                    if p.0 != via {
                        stack.push((far(p), p.0));
                    }
                }
            }
        }
    }
    seg.routers.sort();
    seg.hosts.sort();
    seg
}
