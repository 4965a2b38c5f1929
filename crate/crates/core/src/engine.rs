//! The contract between the simulation kernel and a routing protocol
//! instance running on one router.

use crate::eigrp::EigrpMessage;
use crate::linkstate::{LsHello, Lsp};
use crate::rip::RipAdvertisement;
use crate::table::ForwardingTable;
use crate::types::{InterfaceId, NodeId, SimTime};

/// Fixed on-the-wire sizes of control messages, in bits.
pub mod sizes {
    pub const HELLO: u64 = 480;
    pub const RIP_HEADER: u64 = 192;
    pub const RIP_ENTRY: u64 = 160;
    pub const LSP_HEADER: u64 = 256;
    pub const LSP_ENTRY: u64 = 96;
    pub const EIGRP_HEADER: u64 = 256;
    pub const EIGRP_ROUTE: u64 = 128;
}

/// RIP runs over UDP on this port. Recorded in reports only.
pub const RIP_UDP_PORT: u16 = 520;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlMessage {
    Rip(RipAdvertisement),
    LsHello(LsHello),
    Lsp(Lsp),
    Eigrp(EigrpMessage),
}

impl ControlMessage {
    pub fn size_bits(&self) -> u64 {
        use sizes::*;
        match self {
            ControlMessage::Rip(adv) => RIP_HEADER + RIP_ENTRY * adv.routes.len() as u64,
            ControlMessage::LsHello(_) => HELLO,
            ControlMessage::Lsp(lsp) => {
                LSP_HEADER + LSP_ENTRY * (lsp.links.len() + lsp.stubs.len()) as u64
            }
            ControlMessage::Eigrp(EigrpMessage::Hello) => HELLO,
            ControlMessage::Eigrp(m) => EIGRP_HEADER + EIGRP_ROUTE * m.route_count() as u64,
        }
    }
}

/// What a router knows about one of its interfaces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IfaceView {
    pub id: InterfaceId,
    pub up: bool,
    pub bandwidth_bps: u64,
    pub prop_delay_us: u64,
    /// Other routers reachable on this interface without crossing a router.
    pub peers: Vec<NodeId>,
    /// Hosts reachable on this interface without crossing a router.
    pub hosts: Vec<NodeId>,
}

/// A control message queued by an engine for transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub iface: InterfaceId,
    /// `None` sends to every router on the segment.
    pub to: Option<NodeId>,
    pub msg: ControlMessage,
}

pub struct EngineCtx<'a> {
    pub now: SimTime,
    pub me: NodeId,
    pub ifaces: &'a [IfaceView],
    outbox: Vec<Outgoing>,
}

impl<'a> EngineCtx<'a> {
    pub fn new(now: SimTime, me: NodeId, ifaces: &'a [IfaceView]) -> Self {
        EngineCtx {
            now,
            me,
            ifaces,
            outbox: Vec::new(),
        }
    }

    pub fn iface(&self, id: InterfaceId) -> Option<&IfaceView> {
        self.ifaces.get(id.index())
    }

    /// Up interfaces with at least one router on the far side.
    pub fn routed_ifaces(&self) -> impl Iterator<Item = &IfaceView> {
        self.ifaces.iter().filter(|i| i.up && !i.peers.is_empty())
    }

    pub fn is_peer(&self, iface: InterfaceId, node: NodeId) -> bool {
        self.iface(iface).is_some_and(|i| i.peers.contains(&node))
    }

    pub fn send(&mut self, iface: InterfaceId, to: Option<NodeId>, msg: ControlMessage) {
        self.outbox.push(Outgoing { iface, to, msg });
    }

    pub fn take_outbox(&mut self) -> Vec<Outgoing> {
        std::mem::take(&mut self.outbox)
    }
}

/// A protocol instance on one router. The kernel calls `on_tick` once per
/// simulated second, starting at t = 0.
pub trait RoutingEngine: Send {
    fn on_tick(&mut self, ctx: &mut EngineCtx<'_>);
    fn on_message(
        &mut self,
        ctx: &mut EngineCtx<'_>,
        iface: InterfaceId,
        from: NodeId,
        msg: &ControlMessage,
    );
    fn on_interface_change(&mut self, ctx: &mut EngineCtx<'_>, iface: InterfaceId, up: bool);
    fn forwarding(&self) -> &ForwardingTable;
    /// Messages rejected as malformed or from unexpected senders.
    fn malformed_count(&self) -> u64;
    fn as_any(&self) -> &dyn std::any::Any;
}
