//! Scenario description and its line-oriented text format.
//!
//! ```text
//! [general]
//! name=demo
//! duration_s=60
//! seed=1
//! bucket_s=1
//! protocol=ospf
//!
//! [nodes]
//! A host
//! S switch
//! R router
//! B host
//!
//! [links]
//! A S 10000000 5
//! S R 10000000 5
//! R B 10000000 5
//!
//! [failures]
//! 20 S R fail
//!
//! [flows]
//! A B 5 60 100 120000
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::types::{NodeId, Protocol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Host,
    Switch,
    Router,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Host => "host",
            NodeKind::Switch => "switch",
            NodeKind::Router => "router",
        }
    }

    fn parse(s: &str) -> Option<NodeKind> {
        match s {
            "host" => Some(NodeKind::Host),
            "switch" => Some(NodeKind::Switch),
            "router" => Some(NodeKind::Router),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkSpec {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_bps: u64,
    pub prop_delay_us: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkStatus {
    Up,
    Down,
}

impl LinkStatus {
    /// Keyword used in scenario files.
    pub fn keyword(self) -> &'static str {
        match self {
            LinkStatus::Up => "recover",
            LinkStatus::Down => "fail",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailureSpec {
    pub time_s: u64,
    pub a: NodeId,
    pub b: NodeId,
    pub status: LinkStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSpec {
    pub src: NodeId,
    pub dst: NodeId,
    pub start_s: u64,
    pub stop_s: u64,
    pub rate_pps: u64,
    pub rate_bps: u64,
}

impl FlowSpec {
    pub fn packet_bits(&self) -> u64 {
        self.rate_bps / self.rate_pps
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub duration_s: u64,
    pub seed: u64,
    pub bucket_s: u64,
    pub protocol: Protocol,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub failures: Vec<FailureSpec>,
    pub flows: Vec<FlowSpec>,
}

/// Which part of a scenario a validation problem refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Item {
    General,
    Node(usize),
    Link(usize),
    Failure(usize),
    Flow(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{cause}")]
pub struct ValidationError {
    pub item: Item,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    /// 1-based; 0 refers to the file as a whole.
    pub line: usize,
    pub cause: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "scenario: {}", self.cause)
        } else {
            write!(f, "line {}: {}", self.line, self.cause)
        }
    }
}

impl Scenario {
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .map(|i| NodeId(i as u32))
    }

    pub fn node(&self, id: NodeId) -> &NodeSpec {
        &self.nodes[id.index()]
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    pub fn name_of(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    /// Index of the link joining `a` and `b`, in either orientation.
    pub fn link_index(&self, a: NodeId, b: NodeId) -> Option<usize> {
        self.links
            .iter()
            .position(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    pub fn router_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids_of(NodeKind::Router)
    }

    pub fn host_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids_of(NodeKind::Host)
    }

    fn ids_of(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.kind == kind)
            .map(|(i, _)| NodeId(i as u32))
    }

    pub fn with_protocol(&self, protocol: Protocol) -> Scenario {
        Scenario {
            protocol,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        let err = |item, cause: String| Err(ValidationError { item, cause });
        if self.bucket_s == 0 {
            return err(Item::General, "bucket_s must be positive".into());
        }
        let mut names = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if names.insert(n.name.as_str(), i).is_some() {
                return err(Item::Node(i), format!("duplicate node id {}", n.name));
            }
        }
        let n = self.nodes.len() as u32;
        let known = |id: NodeId| id.0 < n;
        let mut switch_set: Vec<usize> = (0..self.nodes.len()).collect();
        for (i, l) in self.links.iter().enumerate() {
            if !known(l.a) || !known(l.b) {
                return err(Item::Link(i), "unknown node".into());
            }
            if l.a == l.b {
                return err(Item::Link(i), "link joins a node to itself".into());
            }
            if l.bandwidth_bps == 0 {
                return err(Item::Link(i), "bandwidth must be positive".into());
            }
            if self.link_index(l.a, l.b) != Some(i) {
                return err(
                    Item::Link(i),
                    format!("duplicate link {}-{}", self.name_of(l.a), self.name_of(l.b)),
                );
            }
            if self.kind(l.a) == NodeKind::Switch && self.kind(l.b) == NodeKind::Switch {
                let ra = find(&mut switch_set, l.a.index());
                let rb = find(&mut switch_set, l.b.index());
                if ra == rb {
                    return err(
                        Item::Link(i),
                        format!(
                            "layer-2 loop through {}-{}",
                            self.name_of(l.a),
                            self.name_of(l.b)
                        ),
                    );
                }
                switch_set[ra] = rb;
            }
        }
        for (i, f) in self.failures.iter().enumerate() {
            if !known(f.a) || !known(f.b) {
                return err(Item::Failure(i), "unknown node".into());
            }
            if self.link_index(f.a, f.b).is_none() {
                return err(Item::Failure(i), "no such link".into());
            }
            if f.time_s >= self.duration_s {
                return err(Item::Failure(i), "failure time must be before the end of the run".into());
            }
        }
        for (i, f) in self.flows.iter().enumerate() {
            if !known(f.src) || !known(f.dst) {
                return err(Item::Flow(i), "unknown node".into());
            }
            if self.kind(f.src) != NodeKind::Host || self.kind(f.dst) != NodeKind::Host {
                return err(Item::Flow(i), "flow endpoints must be hosts".into());
            }
            if f.src == f.dst {
                return err(Item::Flow(i), "flow source and destination coincide".into());
            }
            if f.rate_pps == 0 || f.rate_bps == 0 {
                return err(Item::Flow(i), "rates must be positive".into());
            }
            if f.packet_bits() == 0 {
                return err(Item::Flow(i), "rate_bps / rate_pps rounds to a zero-size packet".into());
            }
            if f.stop_s < f.start_s {
                return err(Item::Flow(i), "flow stops before it starts".into());
            }
        }
        Ok(())
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum Section {
    General,
    Nodes,
    Links,
    Failures,
    Flows,
}

impl Section {
    fn from_header(s: &str) -> Option<Section> {
        match s {
            "general" => Some(Section::General),
            "nodes" => Some(Section::Nodes),
            "links" => Some(Section::Links),
            "failures" => Some(Section::Failures),
            "flows" => Some(Section::Flows),
            _ => None,
        }
    }
}

fn perr(line: usize, cause: impl Into<String>) -> ParseError {
    ParseError {
        line,
        cause: cause.into(),
    }
}

fn num(line: usize, what: &str, s: &str) -> Result<u64, ParseError> {
    s.parse::<u64>()
        .map_err(|_| perr(line, format!("{what}: expected a non-negative integer, got {s:?}")))
}

fn fields<'a>(line: usize, text: &'a str, n: usize, shape: &str) -> Result<Vec<&'a str>, ParseError> {
    let f: Vec<&str> = text.split_whitespace().collect();
    if f.len() != n {
        return Err(perr(line, format!("expected `{shape}`")));
    }
    Ok(f)
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ParseError> {
    let mut section: Option<Section> = None;
    let mut seen: Vec<Section> = Vec::new();
    let mut general: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut nodes: Vec<NodeSpec> = Vec::new();
    let mut node_lines = Vec::new();
    let mut ids: BTreeMap<String, NodeId> = BTreeMap::new();
    let mut links = Vec::new();
    let mut link_lines = Vec::new();
    let mut failures = Vec::new();
    let mut failure_lines = Vec::new();
    let mut flows = Vec::new();
    let mut flow_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('[') {
            let name = h
                .strip_suffix(']')
                .ok_or_else(|| perr(ln, "unterminated section header"))?
                .trim();
            let s = Section::from_header(name)
                .ok_or_else(|| perr(ln, format!("unknown section [{name}]")))?;
            if seen.contains(&s) {
                return Err(perr(ln, format!("section [{name}] appears twice")));
            }
            seen.push(s);
            section = Some(s);
            continue;
        }
        let lookup = |name: &str| {
            ids.get(name)
                .copied()
                .ok_or_else(|| perr(ln, format!("unknown node {name}")))
        };
        match section {
            None => return Err(perr(ln, "content before the first section header")),
            Some(Section::General) => {
                for tok in line.split_whitespace() {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| perr(ln, format!("expected key=value, got {tok:?}")))?;
                    if general.insert(k.to_string(), (ln, v.to_string())).is_some() {
                        return Err(perr(ln, format!("key {k} given twice")));
                    }
                }
            }
            Some(Section::Nodes) => {
                let f = fields(ln, line, 2, "<id> host|switch|router")?;
                let kind = NodeKind::parse(f[1])
                    .ok_or_else(|| perr(ln, format!("unknown node kind {:?}", f[1])))?;
                if ids.contains_key(f[0]) {
                    return Err(perr(ln, format!("duplicate node id {}", f[0])));
                }
                ids.insert(f[0].to_string(), NodeId(nodes.len() as u32));
                nodes.push(NodeSpec {
                    name: f[0].to_string(),
                    kind,
                });
                node_lines.push(ln);
            }
            Some(Section::Links) => {
                let f = fields(ln, line, 4, "<idA> <idB> <bandwidth_bps> <prop_delay_us>")?;
                links.push(LinkSpec {
                    a: lookup(f[0])?,
                    b: lookup(f[1])?,
                    bandwidth_bps: num(ln, "bandwidth", f[2])?,
                    prop_delay_us: num(ln, "propagation delay", f[3])?,
                });
                link_lines.push(ln);
            }
            Some(Section::Failures) => {
                let f = fields(ln, line, 4, "<time_s> <idA> <idB> fail|recover")?;
                let status = match f[3] {
                    "fail" => LinkStatus::Down,
                    "recover" => LinkStatus::Up,
                    other => return Err(perr(ln, format!("expected fail or recover, got {other:?}"))),
                };
                failures.push(FailureSpec {
                    time_s: num(ln, "time", f[0])?,
                    a: lookup(f[1])?,
                    b: lookup(f[2])?,
                    status,
                });
                failure_lines.push(ln);
            }
            Some(Section::Flows) => {
                let f = fields(ln, line, 6, "<src> <dst> <start_s> <stop_s> <rate_pps> <rate_bps>")?;
                flows.push(FlowSpec {
                    src: lookup(f[0])?,
                    dst: lookup(f[1])?,
                    start_s: num(ln, "start", f[2])?,
                    stop_s: num(ln, "stop", f[3])?,
                    rate_pps: num(ln, "rate_pps", f[4])?,
                    rate_bps: num(ln, "rate_bps", f[5])?,
                });
                flow_lines.push(ln);
            }
        }
    }

    for (s, name) in [
        (Section::General, "general"),
        (Section::Nodes, "nodes"),
        (Section::Links, "links"),
    ] {
        if !seen.contains(&s) {
            return Err(perr(0, format!("missing section [{name}]")));
        }
    }

    let mut take = |key: &str| general.remove(key);
    let (name_line, name) = take("name").ok_or_else(|| perr(0, "missing general key name"))?;
    if name.is_empty() || name.contains(['/', '\\']) {
        return Err(perr(name_line, "name must be non-empty and contain no path separators"));
    }
    let (dl, d) = take("duration_s").ok_or_else(|| perr(0, "missing general key duration_s"))?;
    let duration_s = num(dl, "duration_s", &d)?;
    let seed = match take("seed") {
        Some((l, v)) => num(l, "seed", &v)?,
        None => 0,
    };
    let bucket_s = match take("bucket_s") {
        Some((l, v)) => num(l, "bucket_s", &v)?,
        None => 1,
    };
    let protocol = match take("protocol") {
        Some((l, v)) => Protocol::parse(&v)
            .ok_or_else(|| perr(l, format!("unknown protocol {v:?}")))?,
        None => Protocol::Ospf,
    };
    if let Some((k, (l, _))) = general.into_iter().next() {
        return Err(perr(l, format!("unknown general key {k}")));
    }

    let scenario = Scenario {
        name,
        duration_s,
        seed,
        bucket_s,
        protocol,
        nodes,
        links,
        failures,
        flows,
    };
    scenario.validate().map_err(|e| {
        let line = match e.item {
            Item::General => 0,
            Item::Node(i) => node_lines[i],
            Item::Link(i) => link_lines[i],
            Item::Failure(i) => failure_lines[i],
            Item::Flow(i) => flow_lines[i],
        };
        perr(line, e.cause)
    })?;
    Ok(scenario)
}

/// Canonical text form; `parse_scenario` of the result is the identity.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let name = |id: NodeId| s.name_of(id);
    let _ = writeln!(out, "[general]");
    let _ = writeln!(out, "name={}", s.name);
    let _ = writeln!(out, "duration_s={}", s.duration_s);
    let _ = writeln!(out, "seed={}", s.seed);
    let _ = writeln!(out, "bucket_s={}", s.bucket_s);
    let _ = writeln!(out, "protocol={}", s.protocol);
    let _ = writeln!(out, "\n[nodes]");
    for n in &s.nodes {
        let _ = writeln!(out, "{} {}", n.name, n.kind.as_str());
    }
    let _ = writeln!(out, "\n[links]");
    for l in &s.links {
        let _ = writeln!(
            out,
            "{} {} {} {}",
            name(l.a),
            name(l.b),
            l.bandwidth_bps,
            l.prop_delay_us
        );
    }
    let _ = writeln!(out, "\n[failures]");
    for f in &s.failures {
        let _ = writeln!(out, "{} {} {} {}", f.time_s, name(f.a), name(f.b), f.status.keyword());
    }
    let _ = writeln!(out, "\n[flows]");
    for f in &s.flows {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {}",
            name(f.src),
            name(f.dst),
            f.start_s,
            f.stop_s,
            f.rate_pps,
            f.rate_bps
        );
    }
    out
}
