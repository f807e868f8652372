//! Switch-side OpenFlow abstraction: prioritized flow table with hard
//! timeouts, fast-failover groups watching port liveness, and the control
//! message vocabulary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lldp::{self, IdTlv, LldpFrame};
use crate::sim::SimTime;
use crate::topology::{Dpid, MacAddr};

/// Pseudo-port meaning "every physical port".
pub const OFPP_ALL: u16 = 0xfffc;

pub const DROP_LLDP_PRIORITY: u16 = 10;
pub const FORWARD_RULE_PRIORITY: u16 = 100;
pub const OFDP_LLDP_PRIORITY: u16 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowMatch {
    LldpEthertype,
    LldpEthertypeOnPort(u16),
    /// LLDP whose source MAC is the given slice address.
    LldpFrom(MacAddr),
    Any,
}

impl FlowMatch {
    /// Narrows an LLDP match to one slice, as a flowspace hypervisor would.
    pub fn within_slice(self, mac: MacAddr) -> FlowMatch {
        match self {
            FlowMatch::LldpEthertype => FlowMatch::LldpFrom(mac),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowAction {
    ToController,
    Drop,
    OutPort(u16),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowRule {
    #[serde(rename = "match")]
    pub matcher: FlowMatch,
    pub action: FlowAction,
    pub priority: u16,
    pub hard_timeout: Option<SimTime>,
    pub installed_at: SimTime,
    /// Opaque controller tag, echoed in packet-ins this rule produces.
    pub cookie: u64,
}

impl FlowRule {
    pub fn new(matcher: FlowMatch, action: FlowAction, priority: u16) -> Self {
        FlowRule {
            matcher,
            action,
            priority,
            hard_timeout: None,
            installed_at: SimTime::ZERO,
            cookie: 0,
        }
    }

    pub fn with_timeout(mut self, t: SimTime) -> Self {
        self.hard_timeout = Some(t);
        self
    }

    pub fn with_cookie(mut self, c: u64) -> Self {
        self.cookie = c;
        self
    }

    /// Expiry is exclusive: at exactly `installed_at + hard_timeout` the rule is gone.
    pub fn is_expired(&self, now: SimTime) -> bool {
        self.hard_timeout
            .is_some_and(|t| now >= self.installed_at + t)
    }

    fn matches(&self, in_port: u16, bytes: &[u8]) -> bool {
        match self.matcher {
            FlowMatch::Any => true,
            FlowMatch::LldpEthertype => lldp::is_lldp(bytes),
            FlowMatch::LldpEthertypeOnPort(p) => p == in_port && lldp::is_lldp(bytes),
            FlowMatch::LldpFrom(mac) => lldp::is_lldp(bytes) && lldp::src_mac_of(bytes) == Some(mac),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LivenessSource {
    Bfd,
    Phy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FastFailoverGroup {
    pub group_id: u32,
    pub watched_ports: Vec<u16>,
    pub liveness: LivenessSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PortStatus {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlMessage {
    PacketOut {
        dpid: Dpid,
        out_port: u16,
        payload: Vec<u8>,
    },
    PacketIn {
        dpid: Dpid,
        in_port: u16,
        payload: Vec<u8>,
        cookie: u64,
    },
    FlowMod {
        dpid: Dpid,
        rule: FlowRule,
    },
    GroupMod {
        dpid: Dpid,
        group: FastFailoverGroup,
    },
    PortUpdate {
        dpid: Dpid,
        port_no: u16,
        status: PortStatus,
    },
}

impl ControlMessage {
    pub fn dpid(&self) -> Dpid {
        match self {
            ControlMessage::PacketOut { dpid, .. }
            | ControlMessage::PacketIn { dpid, .. }
            | ControlMessage::FlowMod { dpid, .. }
            | ControlMessage::GroupMod { dpid, .. }
            | ControlMessage::PortUpdate { dpid, .. } => *dpid,
        }
    }

    pub fn kind(&self) -> crate::sim::PacketKind {
        use crate::sim::PacketKind as K;
        match self {
            ControlMessage::PacketOut { .. } => K::PacketOut,
            ControlMessage::PacketIn { .. } => K::PacketIn,
            ControlMessage::FlowMod { .. } => K::FlowMod,
            ControlMessage::GroupMod { .. } => K::GroupMod,
            ControlMessage::PortUpdate { .. } => K::PortUpdate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwitchEffect {
    PacketIn {
        in_port: u16,
        payload: Vec<u8>,
        cookie: u64,
    },
    Drop,
    Forward {
        out_port: u16,
        payload: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SwitchError {
    #[error("{dpid} has no port {port_no}")]
    UnknownPort { dpid: Dpid, port_no: u16 },
}

#[derive(Debug, Clone)]
struct InstalledRule {
    seq: u64,
    rule: FlowRule,
}

/// One switch's forwarding state.
#[derive(Debug, Clone)]
pub struct SwitchState {
    pub dpid: Dpid,
    live: BTreeMap<u16, bool>,
    flows: Vec<InstalledRule>,
    groups: BTreeMap<u32, FastFailoverGroup>,
    next_seq: u64,
}

impl SwitchState {
    /// All ports start not-live.
    pub fn new(dpid: Dpid, ports: impl IntoIterator<Item = u16>) -> Self {
        SwitchState {
            dpid,
            live: ports.into_iter().map(|p| (p, false)).collect(),
            flows: Vec::new(),
            groups: BTreeMap::new(),
            next_seq: 0,
        }
    }

    pub fn ports(&self) -> impl Iterator<Item = u16> + '_ {
        self.live.keys().copied()
    }

    pub fn has_port(&self, port_no: u16) -> bool {
        self.live.contains_key(&port_no)
    }

    pub fn is_live(&self, port_no: u16) -> bool {
        self.live.get(&port_no).copied().unwrap_or(false)
    }

    pub fn flows(&self) -> impl Iterator<Item = &FlowRule> {
        self.flows.iter().map(|r| &r.rule)
    }

    pub fn groups(&self) -> impl Iterator<Item = &FastFailoverGroup> {
        self.groups.values()
    }

    pub fn install_flow(&mut self, mut rule: FlowRule, now: SimTime) {
        rule.installed_at = now;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.flows.push(InstalledRule { seq, rule });
    }

    pub fn expire_flows(&mut self, now: SimTime) {
        self.flows.retain(|r| !r.rule.is_expired(now));
    }

    pub fn install_group(&mut self, group: FastFailoverGroup) {
        self.groups.insert(group.group_id, group);
    }

    pub fn is_watched(&self, port_no: u16) -> bool {
        self.groups
            .values()
            .any(|g| g.watched_ports.contains(&port_no))
    }

    /// The winning rule for a packet: highest priority, then most recent install.
    pub fn lookup(&self, in_port: u16, bytes: &[u8], now: SimTime) -> Option<&FlowRule> {
        self.flows
            .iter()
            .filter(|r| !r.rule.is_expired(now) && r.rule.matches(in_port, bytes))
            .max_by_key(|r| (r.rule.priority, r.seq))
            .map(|r| &r.rule)
    }

    /// Data-plane arrival on `in_port`. No matching rule means drop.
    pub fn handle_packet(&self, in_port: u16, bytes: &[u8], now: SimTime) -> Vec<SwitchEffect> {
        if !self.has_port(in_port) {
            return vec![SwitchEffect::Drop];
        }
        let effect = match self.lookup(in_port, bytes, now) {
            None => SwitchEffect::Drop,
            Some(r) => match r.action {
                FlowAction::Drop => SwitchEffect::Drop,
                FlowAction::ToController => SwitchEffect::PacketIn {
                    in_port,
                    payload: bytes.to_vec(),
                    cookie: r.cookie,
                },
                FlowAction::OutPort(p) => SwitchEffect::Forward {
                    out_port: p,
                    payload: bytes.to_vec(),
                },
            },
        };
        vec![effect]
    }

    /// Executes a packet-out; these bypass the flow table. `OFPP_ALL`
    /// replicates to every port, rewriting the LLDP port TLV per egress port.
    pub fn packet_out(&self, out_port: u16, payload: &[u8]) -> Vec<(u16, Vec<u8>)> {
        if out_port != OFPP_ALL {
            return if self.has_port(out_port) {
                vec![(out_port, payload.to_vec())]
            } else {
                Vec::new()
            };
        }
        let frame = LldpFrame::decode(payload).ok();
        self.ports()
            .map(|p| {
                let bytes = match &frame {
                    Some(f) => {
                        let mut g = f.clone();
                        g.port = IdTlv::new(f.port.subtype, p.to_be_bytes());
                        g.encode().unwrap_or_else(|_| payload.to_vec())
                    }
                    None => payload.to_vec(),
                };
                (p, bytes)
            })
            .collect()
    }

    /// Records a liveness report; emits one port-update per transition on a
    /// watched port.
    pub fn port_liveness_change(
        &mut self,
        port_no: u16,
        alive: bool,
        _now: SimTime,
    ) -> Result<Option<ControlMessage>, SwitchError> {
        let slot = self.live.get_mut(&port_no).ok_or(SwitchError::UnknownPort {
            dpid: self.dpid,
            port_no,
        })?;
        if *slot == alive {
            return Ok(None);
        }
        *slot = alive;
        if !self.is_watched(port_no) {
            return Ok(None);
        }
        Ok(Some(ControlMessage::PortUpdate {
            dpid: self.dpid,
            port_no,
            status: if alive { PortStatus::Up } else { PortStatus::Down },
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lldp::tests::golden_frame;

    fn lldp_bytes() -> Vec<u8> {
        golden_frame().encode().unwrap()
    }

    fn ofdp_switch() -> SwitchState {
        let mut s = SwitchState::new(Dpid(2), [1, 2]);
        s.install_flow(
            FlowRule::new(FlowMatch::LldpEthertype, FlowAction::ToController, OFDP_LLDP_PRIORITY),
            SimTime::ZERO,
        );
        s
    }

    fn softd_switch() -> SwitchState {
        let mut s = SwitchState::new(Dpid(2), [1, 2]);
        s.install_flow(
            FlowRule::new(FlowMatch::LldpEthertype, FlowAction::Drop, DROP_LLDP_PRIORITY),
            SimTime::ZERO,
        );
        s
    }

    #[test]
    fn ofdp_lldp_goes_to_controller() {
        let b = lldp_bytes();
        assert_eq!(
            ofdp_switch().handle_packet(2, &b, SimTime::from_secs(3)),
            vec![SwitchEffect::PacketIn {
                in_port: 2,
                payload: b,
                cookie: 0
            }]
        );
    }

    #[test]
    fn softd_drops_lldp_unless_forward_rule_active() {
        let b = lldp_bytes();
        let mut s = softd_switch();
        assert_eq!(s.handle_packet(2, &b, SimTime::ZERO), vec![SwitchEffect::Drop]);
        s.install_flow(
            FlowRule::new(FlowMatch::LldpEthertypeOnPort(2), FlowAction::ToController, FORWARD_RULE_PRIORITY)
                .with_timeout(SimTime::from_secs(1))
                .with_cookie(7),
            SimTime::ZERO,
        );
        assert!(matches!(
            s.handle_packet(2, &b, SimTime::from_micros(999_999))[0],
            SwitchEffect::PacketIn { cookie: 7, .. }
        ));
        assert_eq!(s.handle_packet(1, &b, SimTime::ZERO), vec![SwitchEffect::Drop]);
        assert_eq!(
            s.handle_packet(2, &b, SimTime::from_secs(1)),
            vec![SwitchEffect::Drop]
        );
    }

    #[test]
    fn non_lldp_without_rule_is_dropped() {
        let mut b = lldp_bytes();
        b[12] = 0x08;
        b[13] = 0x00;
        assert_eq!(ofdp_switch().handle_packet(1, &b, SimTime::ZERO), vec![SwitchEffect::Drop]);
    }

    #[test]
    fn recency_breaks_priority_ties() {
        let mut s = SwitchState::new(Dpid(1), [1]);
        s.install_flow(FlowRule::new(FlowMatch::Any, FlowAction::Drop, 5), SimTime::ZERO);
        s.install_flow(FlowRule::new(FlowMatch::Any, FlowAction::OutPort(1), 5), SimTime::ZERO);
        assert_eq!(
            s.handle_packet(1, b"x", SimTime::ZERO),
            vec![SwitchEffect::Forward {
                out_port: 1,
                payload: b"x".to_vec()
            }]
        );
    }

    #[test]
    fn slice_match_filters_on_source_mac() {
        let b = lldp_bytes();
        let mine = golden_frame().src_mac;
        let m = FlowMatch::LldpEthertype.within_slice(MacAddr([0x02, 0xc0, 0, 0, 0, 9]));
        let mut s = SwitchState::new(Dpid(1), [1]);
        s.install_flow(FlowRule::new(m, FlowAction::ToController, 5), SimTime::ZERO);
        assert_eq!(s.handle_packet(1, &b, SimTime::ZERO), vec![SwitchEffect::Drop]);
        s.install_flow(
            FlowRule::new(FlowMatch::LldpEthertype.within_slice(mine), FlowAction::ToController, 5),
            SimTime::ZERO,
        );
        assert!(matches!(s.handle_packet(1, &b, SimTime::ZERO)[0], SwitchEffect::PacketIn { .. }));
        assert_eq!(FlowMatch::Any.within_slice(mine), FlowMatch::Any);
    }

    #[test]
    fn expire_flows_is_exact_at_boundary() {
        let mut s = SwitchState::new(Dpid(1), [1]);
        s.install_flow(
            FlowRule::new(FlowMatch::Any, FlowAction::ToController, 1).with_timeout(SimTime::from_secs(1)),
            SimTime::from_secs(2),
        );
        s.expire_flows(SimTime::from_micros(2_999_999));
        assert_eq!(s.flows().count(), 1);
        s.expire_flows(SimTime::from_secs(3));
        assert_eq!(s.flows().count(), 0);
    }

    #[test]
    fn liveness_reports() {
        let mut s = SwitchState::new(Dpid(1), [1, 2]);
        s.install_group(FastFailoverGroup {
            group_id: 1,
            watched_ports: vec![1],
            liveness: LivenessSource::Bfd,
        });
        let now = SimTime::ZERO;
        assert!(matches!(
            s.port_liveness_change(1, true, now).unwrap(),
            Some(ControlMessage::PortUpdate { status: PortStatus::Up, .. })
        ));
        assert_eq!(
            s.port_liveness_change(1, false, now).unwrap(),
            Some(ControlMessage::PortUpdate {
                dpid: Dpid(1),
                port_no: 1,
                status: PortStatus::Down
            })
        );
        assert_eq!(s.port_liveness_change(1, false, now).unwrap(), None);
        s.port_liveness_change(2, true, now).unwrap();
        assert_eq!(s.port_liveness_change(2, false, now).unwrap(), None);
        assert_eq!(
            s.port_liveness_change(9, true, now),
            Err(SwitchError::UnknownPort {
                dpid: Dpid(1),
                port_no: 9
            })
        );
    }

    #[test]
    fn packet_out_all_rewrites_port_tlv() {
        let s = SwitchState::new(Dpid(1), [1, 2, 3]);
        let outs = s.packet_out(OFPP_ALL, &lldp_bytes());
        assert_eq!(outs.len(), 3);
        for (p, b) in outs {
            let f = LldpFrame::decode(&b).unwrap();
            assert_eq!(f.port.as_port_no(), Some(p));
            assert_eq!(f.chassis, golden_frame().chassis);
        }
        assert!(s.packet_out(9, &lldp_bytes()).is_empty());
    }
}
