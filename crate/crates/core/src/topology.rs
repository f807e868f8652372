//! Ground-truth network graph, topology events and view/truth diffs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

/// OpenFlow datapath identifier. Nonzero and unique within one topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dpid(pub u64);

impl Dpid {
    /// The lower 48 bits, the conventional switch MAC carried in a DPID.
    pub fn embedded_mac(self) -> MacAddr {
        let b = self.0.to_be_bytes();
        MacAddr([b[2], b[3], b[4], b[5], b[6], b[7]])
    }
}

impl fmt::Display for Dpid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MacAddr(pub [u8; 6]);

impl MacAddr {
    pub const fn new(b: [u8; 6]) -> Self {
        MacAddr(b)
    }

    pub fn octets(&self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            a[0], a[1], a[2], a[3], a[4], a[5]
        )
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid MAC address {0:?}")]
pub struct ParseMacError(String);

impl FromStr for MacAddr {
    type Err = ParseMacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split([':', '-']).collect();
        if parts.len() != 6 {
            return Err(ParseMacError(s.to_string()));
        }
        let mut out = [0u8; 6];
        for (o, p) in out.iter_mut().zip(parts) {
            if p.len() != 2 {
                return Err(ParseMacError(s.to_string()));
            }
            *o = u8::from_str_radix(p, 16).map_err(|_| ParseMacError(s.to_string()))?;
        }
        Ok(MacAddr(out))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A switch port, identified by its switch and port number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PortId {
    pub dpid: Dpid,
    #[serde(rename = "port")]
    pub port_no: u16,
}

impl PortId {
    pub fn new(dpid: u64, port_no: u16) -> Self {
        PortId {
            dpid: Dpid(dpid),
            port_no,
        }
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/p{}", self.dpid, self.port_no)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HostId(pub String);

impl fmt::Display for HostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for HostId {
    fn from(s: &str) -> Self {
        HostId(s.to_string())
    }
}

/// What sits on the far side of a port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Attachment {
    SwitchLink(PortId),
    HostLink(HostId),
    Unattached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortRef {
    pub id: PortId,
    pub mac: MacAddr,
    pub attached: Attachment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchInfo {
    pub dpid: Dpid,
    /// The MAC of the switch's local port, which MAC-keyed controllers use as its identity.
    pub local_port_mac: MacAddr,
    pub ports: BTreeMap<u16, PortRef>,
}

/// An undirected switch-to-switch link, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Link {
    pub a: PortId,
    pub b: PortId,
}

impl Link {
    pub fn new(x: PortId, y: PortId) -> Self {
        if x <= y {
            Link { a: x, b: y }
        } else {
            Link { a: y, b: x }
        }
    }

    pub fn directions(&self) -> [DirectedLink; 2] {
        [
            DirectedLink {
                src: self.a,
                dst: self.b,
            },
            DirectedLink {
                src: self.b,
                dst: self.a,
            },
        ]
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}<->{}", self.a, self.b)
    }
}

/// A unidirectional link as believed by a controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirectedLink {
    pub src: PortId,
    pub dst: PortId,
}

impl DirectedLink {
    pub fn reversed(&self) -> DirectedLink {
        DirectedLink {
            src: self.dst,
            dst: self.src,
        }
    }

    pub fn touches(&self, port: PortId) -> bool {
        self.src == port || self.dst == port
    }

    /// Switch-level projection, `(src dpid, dst dpid)`.
    pub fn switches(&self) -> (Dpid, Dpid) {
        (self.src.dpid, self.dst.dpid)
    }
}

impl fmt::Display for DirectedLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.src, self.dst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PortDecl {
    Number(u16),
    Full { port: u16, mac: Option<MacAddr> },
}

impl PortDecl {
    fn number(&self) -> u16 {
        match self {
            PortDecl::Number(n) => *n,
            PortDecl::Full { port, .. } => *port,
        }
    }

    fn mac(&self) -> Option<MacAddr> {
        match self {
            PortDecl::Number(_) => None,
            PortDecl::Full { mac, .. } => *mac,
        }
    }
}

/// Either a port count (ports `1..=n`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PortsSpec {
    Count(u16),
    List(Vec<PortDecl>),
}

impl PortsSpec {
    fn decls(&self) -> Vec<PortDecl> {
        match self {
            PortsSpec::Count(n) => (1..=*n).map(PortDecl::Number).collect(),
            PortsSpec::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchSpec {
    pub dpid: Dpid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_port_mac: Option<MacAddr>,
    pub ports: PortsSpec,
}

impl SwitchSpec {
    pub fn with_ports(dpid: u64, ports: u16) -> Self {
        SwitchSpec {
            dpid: Dpid(dpid),
            local_port_mac: None,
            ports: PortsSpec::Count(ports),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostSpec {
    pub id: HostId,
    pub dpid: Dpid,
    pub port: u16,
}

impl HostSpec {
    pub fn new(id: &str, dpid: u64, port: u16) -> Self {
        HostSpec {
            id: id.into(),
            dpid: Dpid(dpid),
            port,
        }
    }

    pub fn attachment(&self) -> PortId {
        PortId {
            dpid: self.dpid,
            port_no: self.port,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub a: PortId,
    pub b: PortId,
}

impl LinkSpec {
    pub fn new(a: (u64, u16), b: (u64, u16)) -> Self {
        LinkSpec {
            a: PortId::new(a.0, a.1),
            b: PortId::new(b.0, b.1),
        }
    }
}

/// Declarative topology description, as embedded in scenario files.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(default)]
    pub switches: Vec<SwitchSpec>,
    #[serde(default)]
    pub hosts: Vec<HostSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("switch dpid must be nonzero")]
    ZeroDpid,
    #[error("duplicate switch {0}")]
    DuplicateDpid(Dpid),
    #[error("duplicate port {0}")]
    DuplicatePort(PortId),
    #[error("port number 0 is invalid on {0}")]
    InvalidPortNumber(Dpid),
    #[error("duplicate MAC {mac} (on {owner})")]
    DuplicateMac { mac: MacAddr, owner: String },
    #[error("duplicate host {0}")]
    DuplicateHost(HostId),
    #[error("unknown switch {0}")]
    UnknownSwitch(Dpid),
    #[error("unknown port {0}")]
    UnknownPort(PortId),
    #[error("unknown host {0}")]
    UnknownHost(HostId),
    #[error("link {link} has dangling endpoint {endpoint}")]
    DanglingLinkEndpoint { link: String, endpoint: PortId },
    #[error("port {0} is already attached")]
    PortInUse(PortId),
    #[error("link {0} connects a port to itself")]
    SelfLink(PortId),
    #[error("no link between {0} and {1}")]
    NoSuchLink(PortId, PortId),
}

/// The authoritative network graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruthTopology {
    switches: BTreeMap<Dpid, SwitchInfo>,
    hosts: BTreeMap<HostId, PortId>,
    links: BTreeSet<Link>,
    total_ports: usize,
}

fn default_port_mac(dpid: Dpid, port_no: u16) -> MacAddr {
    let d = dpid.0.to_be_bytes();
    let p = port_no.to_be_bytes();
    MacAddr([0x02, d[5], d[6], d[7], p[0], p[1]])
}

impl GroundTruthTopology {
    pub fn empty() -> Self {
        GroundTruthTopology {
            switches: BTreeMap::new(),
            hosts: BTreeMap::new(),
            links: BTreeSet::new(),
            total_ports: 0,
        }
    }

    /// Validates a description and builds the topology.
    pub fn build(spec: &TopologySpec) -> Result<Self, TopologyError> {
        let mut t = Self::empty();
        for s in &spec.switches {
            t.add_switch(s)?;
        }
        for h in &spec.hosts {
            t.add_host(h)?;
        }
        for l in &spec.links {
            t.add_link(l.a, l.b).map_err(|e| match e {
                TopologyError::UnknownPort(endpoint) => TopologyError::DanglingLinkEndpoint {
                    link: format!("{}<->{}", l.a, l.b),
                    endpoint,
                },
                other => other,
            })?;
        }
        Ok(t)
    }

    /// Number of switches, `n`.
    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    /// Number of undirected switch links, `L`.
    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    /// Total switch ports over all switches, `Σpᵢ`.
    pub fn total_ports(&self) -> usize {
        self.total_ports
    }

    pub fn switches(&self) -> impl Iterator<Item = &SwitchInfo> {
        self.switches.values()
    }

    pub fn switch(&self, dpid: Dpid) -> Option<&SwitchInfo> {
        self.switches.get(&dpid)
    }

    pub fn port(&self, id: PortId) -> Option<&PortRef> {
        self.switches.get(&id.dpid)?.ports.get(&id.port_no)
    }

    pub fn links(&self) -> &BTreeSet<Link> {
        &self.links
    }

    pub fn hosts(&self) -> impl Iterator<Item = (&HostId, &PortId)> {
        self.hosts.iter()
    }

    pub fn host(&self, id: &HostId) -> Option<PortId> {
        self.hosts.get(id).copied()
    }

    /// Every truth link in both directions.
    pub fn directed_links(&self) -> BTreeSet<DirectedLink> {
        self.links.iter().flat_map(|l| l.directions()).collect()
    }

    pub fn apply_event(&self, e: &TopologyEvent) -> Result<Self, TopologyError> {
        let mut t = self.clone();
        match &e.kind {
            TopologyEventKind::LinkUp { a, b } => t.add_link(*a, *b)?,
            TopologyEventKind::LinkDown { a, b } => t.remove_link(*a, *b)?,
            TopologyEventKind::SwitchJoin(s) => t.add_switch(s)?,
            TopologyEventKind::SwitchLeave { dpid } => t.remove_switch(*dpid)?,
            TopologyEventKind::HostJoin(h) => t.add_host(h)?,
        }
        Ok(t)
    }

    fn mac_owner(&self, mac: MacAddr) -> Option<String> {
        for s in self.switches.values() {
            if s.local_port_mac == mac {
                return Some(s.dpid.to_string());
            }
            if let Some(p) = s.ports.values().find(|p| p.mac == mac) {
                return Some(p.id.to_string());
            }
        }
        None
    }

    fn add_switch(&mut self, s: &SwitchSpec) -> Result<(), TopologyError> {
        if s.dpid.0 == 0 {
            return Err(TopologyError::ZeroDpid);
        }
        if self.switches.contains_key(&s.dpid) {
            return Err(TopologyError::DuplicateDpid(s.dpid));
        }
        let local_port_mac = s.local_port_mac.unwrap_or_else(|| s.dpid.embedded_mac());
        let mut seen_macs = BTreeSet::from([local_port_mac]);
        if let Some(owner) = self.mac_owner(local_port_mac) {
            return Err(TopologyError::DuplicateMac {
                mac: local_port_mac,
                owner,
            });
        }
        let mut ports = BTreeMap::new();
        for decl in s.ports.decls() {
            let port_no = decl.number();
            if port_no == 0 {
                return Err(TopologyError::InvalidPortNumber(s.dpid));
            }
            let id = PortId {
                dpid: s.dpid,
                port_no,
            };
            if ports.contains_key(&port_no) {
                return Err(TopologyError::DuplicatePort(id));
            }
            let mac = decl.mac().unwrap_or_else(|| default_port_mac(s.dpid, port_no));
            if !seen_macs.insert(mac) {
                return Err(TopologyError::DuplicateMac {
                    mac,
                    owner: s.dpid.to_string(),
                });
            }
            if let Some(owner) = self.mac_owner(mac) {
                return Err(TopologyError::DuplicateMac { mac, owner });
            }
            ports.insert(
                port_no,
                PortRef {
                    id,
                    mac,
                    attached: Attachment::Unattached,
                },
            );
        }
        self.total_ports += ports.len();
        self.switches.insert(
            s.dpid,
            SwitchInfo {
                dpid: s.dpid,
                local_port_mac,
                ports,
            },
        );
        Ok(())
    }

    fn port_mut(&mut self, id: PortId) -> Result<&mut PortRef, TopologyError> {
        let sw = self
            .switches
            .get_mut(&id.dpid)
            .ok_or(TopologyError::UnknownPort(id))?;
        sw.ports.get_mut(&id.port_no).ok_or(TopologyError::UnknownPort(id))
    }

    fn add_host(&mut self, h: &HostSpec) -> Result<(), TopologyError> {
        if self.hosts.contains_key(&h.id) {
            return Err(TopologyError::DuplicateHost(h.id.clone()));
        }
        let at = h.attachment();
        let port = self.port_mut(at)?;
        if port.attached != Attachment::Unattached {
            return Err(TopologyError::PortInUse(at));
        }
        port.attached = Attachment::HostLink(h.id.clone());
        self.hosts.insert(h.id.clone(), at);
        Ok(())
    }

    fn add_link(&mut self, a: PortId, b: PortId) -> Result<(), TopologyError> {
        if a == b {
            return Err(TopologyError::SelfLink(a));
        }
        for p in [a, b] {
            let port = self.port_mut(p)?;
            if port.attached != Attachment::Unattached {
                return Err(TopologyError::PortInUse(p));
            }
        }
        self.port_mut(a)?.attached = Attachment::SwitchLink(b);
        self.port_mut(b)?.attached = Attachment::SwitchLink(a);
        self.links.insert(Link::new(a, b));
        Ok(())
    }

    fn remove_link(&mut self, a: PortId, b: PortId) -> Result<(), TopologyError> {
        if !self.links.remove(&Link::new(a, b)) {
            return Err(TopologyError::NoSuchLink(a, b));
        }
        self.port_mut(a)?.attached = Attachment::Unattached;
        self.port_mut(b)?.attached = Attachment::Unattached;
        Ok(())
    }

    fn remove_switch(&mut self, dpid: Dpid) -> Result<(), TopologyError> {
        let sw = self
            .switches
            .remove(&dpid)
            .ok_or(TopologyError::UnknownSwitch(dpid))?;
        self.total_ports -= sw.ports.len();
        let dead: Vec<Link> = self
            .links
            .iter()
            .filter(|l| l.a.dpid == dpid || l.b.dpid == dpid)
            .copied()
            .collect();
        for l in dead {
            self.links.remove(&l);
            let far = if l.a.dpid == dpid { l.b } else { l.a };
            if far.dpid != dpid {
                self.port_mut(far)?.attached = Attachment::Unattached;
            }
        }
        self.hosts.retain(|_, at| at.dpid != dpid);
        Ok(())
    }

    /// Recomputes every cached quantity and cross-reference from scratch.
    pub fn check_invariants(&self) -> Result<(), String> {
        let ports: usize = self.switches.values().map(|s| s.ports.len()).sum();
        if ports != self.total_ports {
            return Err(format!("cached Σp {} != {}", self.total_ports, ports));
        }
        let mut used = BTreeSet::new();
        for l in &self.links {
            for (p, peer) in [(l.a, l.b), (l.b, l.a)] {
                if !used.insert(p) {
                    return Err(format!("port {p} in two links"));
                }
                match self.port(p).map(|r| &r.attached) {
                    Some(Attachment::SwitchLink(q)) if *q == peer => {}
                    other => return Err(format!("link endpoint {p} marked {other:?}")),
                }
            }
        }
        for s in self.switches.values() {
            for p in s.ports.values() {
                if p.id.port_no == 0 {
                    return Err(format!("port 0 on {}", s.dpid));
                }
                if let Attachment::SwitchLink(q) = &p.attached {
                    if !self.links.contains(&Link::new(p.id, *q)) {
                        return Err(format!("{} marked linked without a link", p.id));
                    }
                }
            }
        }
        for (h, at) in &self.hosts {
            match self.port(*at).map(|r| &r.attached) {
                Some(Attachment::HostLink(x)) if x == h => {}
                other => return Err(format!("host {h} at {at} shows {other:?}")),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TopologyEventKind {
    LinkUp { a: PortId, b: PortId },
    LinkDown { a: PortId, b: PortId },
    SwitchJoin(SwitchSpec),
    SwitchLeave { dpid: Dpid },
    HostJoin(HostSpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyEvent {
    /// Microseconds since run start.
    pub at: SimTime,
    #[serde(flatten)]
    pub kind: TopologyEventKind,
}

impl TopologyEvent {
    pub fn link_down(at: SimTime, a: PortId, b: PortId) -> Self {
        TopologyEvent {
            at,
            kind: TopologyEventKind::LinkDown { a, b },
        }
    }

    pub fn link_up(at: SimTime, a: PortId, b: PortId) -> Self {
        TopologyEvent {
            at,
            kind: TopologyEventKind::LinkUp { a, b },
        }
    }
}

/// Directed-link set difference between a controller's belief and the truth.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyDiff {
    pub phantom_links: BTreeSet<DirectedLink>,
    pub missing_links: BTreeSet<DirectedLink>,
}

impl TopologyDiff {
    pub fn is_exact(&self) -> bool {
        self.phantom_links.is_empty() && self.missing_links.is_empty()
    }

    /// Phantom links projected onto `(src switch, dst switch)` pairs.
    pub fn phantom_switch_pairs(&self) -> BTreeSet<(Dpid, Dpid)> {
        self.phantom_links.iter().map(DirectedLink::switches).collect()
    }
}

pub fn diff<'a>(
    believed: impl IntoIterator<Item = &'a DirectedLink>,
    truth: &GroundTruthTopology,
) -> TopologyDiff {
    let believed: BTreeSet<DirectedLink> = believed.into_iter().copied().collect();
    let actual = truth.directed_links();
    TopologyDiff {
        phantom_links: believed.difference(&actual).copied().collect(),
        missing_links: actual.difference(&believed).copied().collect(),
    }
}
