use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ofdp, softd, DiscoveryConfig, DiscoveryMode, RoundStats, TopologyView};
use crate::lldp::{verify_hmac, ChassisEncoding, LldpFrame, CHASSIS_SUBTYPE_MAC};
use crate::openflow::{ControlMessage, FlowAction, FlowMatch, FlowRule, PortStatus, OFDP_LLDP_PRIORITY};
use crate::sim::SimTime;
use crate::topology::{DirectedLink, Dpid, MacAddr, PortId};

/// What a switch reports about itself when it connects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchFeatures {
    pub dpid: Dpid,
    pub local_mac: MacAddr,
    pub ports: Vec<u16>,
}

/// A connected switch as the controller knows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchRecord {
    /// Identity the controller attributes to this switch.
    pub dpid: Dpid,
    pub local_mac: MacAddr,
    pub ports: Vec<u16>,
    /// The physical switch on the other end of the control channel.
    pub conn: Dpid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConnectOutcome {
    Accepted {
        as_dpid: Dpid,
        /// A previous connection that held the same identity, now closed.
        replaced: Option<Dpid>,
        provisioning: Vec<ControlMessage>,
    },
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub msg: ControlMessage,
    /// Discovery traffic as opposed to one-off provisioning.
    pub discovery: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    NotLldp,
    UnknownChassis,
    BadPortTlv,
    MissingHmac,
    BadHmac,
    NoForwardWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketInVerdict {
    Confirmed { link: DirectedLink, new: bool },
    Rejected(RejectReason),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerCounters {
    pub packet_ins: u64,
    pub confirmed: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
    pub port_updates: u64,
    pub rejected_connections: u64,
}

impl ControllerCounters {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }
}

/// One discovery controller.
#[derive(Debug, Clone)]
pub struct Controller {
    pub index: usize,
    config: DiscoveryConfig,
    /// Source MAC of this controller's probes; per-controller so that
    /// packet-ins can be sliced back to their owner.
    slice_mac: MacAddr,
    view: TopologyView,
    switches: BTreeMap<Dpid, SwitchRecord>,
    conns: BTreeMap<Dpid, Dpid>,
    rounds: Vec<RoundStats>,
    forward_cookies: BTreeSet<u64>,
    next_cookie: u64,
    counters: ControllerCounters,
}

impl Controller {
    pub fn new(index: usize, config: DiscoveryConfig, slice_mac: MacAddr) -> Self {
        Controller {
            index,
            config,
            slice_mac,
            view: TopologyView::new(),
            switches: BTreeMap::new(),
            conns: BTreeMap::new(),
            rounds: Vec::new(),
            forward_cookies: BTreeSet::new(),
            // cookies are unique across controllers sharing a switch
            next_cookie: ((index as u64) << 32) | 1,
            counters: ControllerCounters::default(),
        }
    }

    pub fn config(&self) -> &DiscoveryConfig {
        &self.config
    }

    pub fn slice_mac(&self) -> MacAddr {
        self.slice_mac
    }

    pub fn view(&self) -> &TopologyView {
        &self.view
    }

    pub fn rounds(&self) -> &[RoundStats] {
        &self.rounds
    }

    pub fn counters(&self) -> &ControllerCounters {
        &self.counters
    }

    pub fn records(&self) -> impl Iterator<Item = &SwitchRecord> {
        self.switches.values()
    }

    /// Believed identity behind a control connection.
    pub fn identity_of(&self, conn: Dpid) -> Option<Dpid> {
        self.conns.get(&conn).copied()
    }

    /// Control connection currently holding an identity.
    pub fn conn_of(&self, dpid: Dpid) -> Option<Dpid> {
        self.switches.get(&dpid).map(|r| r.conn)
    }

    /// Links the controller currently reports.
    pub fn reported_links(&self, now: SimTime) -> BTreeSet<DirectedLink> {
        if self.config.mode.is_periodic() {
            let bound = self.config.staleness_bound();
            self.view
                .links()
                .filter(|l| {
                    self.view
                        .last_confirmed(l)
                        .is_some_and(|t| now.saturating_sub(t) < bound)
                })
                .copied()
                .collect()
        } else {
            self.view.link_set()
        }
    }

    /// Switch handshake. Without channel binding the claimed identity is
    /// trusted, so a claim matching an existing switch takes over its slot.
    pub fn connect(&mut self, conn: Dpid, features: SwitchFeatures) -> ConnectOutcome {
        let existing = match self.config.profile.chassis_encoding {
            ChassisEncoding::MacAsId => self
                .switches
                .values()
                .find(|r| r.local_mac == features.local_mac)
                .map(|r| r.dpid),
            ChassisEncoding::DpidAsId => self.switches.get(&features.dpid).map(|r| r.dpid),
        };
        let as_dpid = existing.unwrap_or(features.dpid);
        if self.config.channel_binding && (as_dpid != conn || features.dpid != conn) {
            self.counters.rejected_connections += 1;
            return ConnectOutcome::Rejected;
        }
        let replaced = self
            .switches
            .get(&as_dpid)
            .map(|r| r.conn)
            .filter(|&c| c != conn);
        if let Some(c) = replaced {
            self.conns.remove(&c);
        }
        if let Some(old) = self.conns.get(&conn).copied().filter(|&d| d != as_dpid) {
            self.switches.remove(&old);
            self.view.remove_switch(old);
        }
        let record = SwitchRecord {
            dpid: as_dpid,
            local_mac: features.local_mac,
            ports: features.ports,
            conn,
        };
        let provisioning = match self.config.mode {
            DiscoveryMode::Ofdp | DiscoveryMode::Ofdpv2 => vec![ControlMessage::FlowMod {
                dpid: as_dpid,
                rule: FlowRule::new(FlowMatch::LldpEthertype, FlowAction::ToController, OFDP_LLDP_PRIORITY),
            }],
            DiscoveryMode::Softd => softd::softd_provisioning(&record),
        };
        self.switches.insert(as_dpid, record);
        self.conns.insert(conn, as_dpid);
        self.view.add_switch(as_dpid);
        ConnectOutcome::Accepted {
            as_dpid,
            replaced,
            provisioning,
        }
    }

    pub fn disconnect(&mut self, conn: Dpid) {
        if let Some(d) = self.conns.remove(&conn) {
            self.switches.remove(&d);
            self.view.remove_switch(d);
        }
    }

    /// Starts a periodic round: ages links, then emits the probes.
    pub fn start_round(&mut self, now: SimTime) -> Vec<Outgoing> {
        if !self.config.mode.is_periodic() {
            return Vec::new();
        }
        ofdp::ofdp_age_links(&mut self.view, &self.config, now);
        let records: Vec<SwitchRecord> = self.switches.values().cloned().collect();
        let (msgs, mut stats) = match self.config.mode {
            DiscoveryMode::Ofdp => ofdp::ofdp_run_round(&records, &self.config, self.slice_mac, now),
            _ => ofdp::ofdpv2_run_round(&records, &self.config, self.slice_mac, now),
        };
        stats.round_index = self.rounds.len() as u64;
        self.rounds.push(stats);
        msgs.into_iter()
            .map(|msg| Outgoing { msg, discovery: true })
            .collect()
    }

    /// A message from the switch behind `conn`. Unknown connections are ignored.
    pub fn receive(&mut self, conn: Dpid, msg: ControlMessage, now: SimTime) -> (Option<PacketInVerdict>, Vec<Outgoing>) {
        let Some(at) = self.identity_of(conn) else {
            return (None, Vec::new());
        };
        match msg {
            ControlMessage::PacketIn {
                in_port,
                payload,
                cookie,
                ..
            } => (
                Some(self.handle_packet_in(at, in_port, &payload, cookie, now)),
                Vec::new(),
            ),
            ControlMessage::PortUpdate { port_no, status, .. } => {
                self.counters.port_updates += 1;
                (None, self.on_port_update(at, port_no, status, now))
            }
            _ => (None, Vec::new()),
        }
    }

    fn on_port_update(&mut self, at: Dpid, port_no: u16, status: PortStatus, now: SimTime) -> Vec<Outgoing> {
        if self.config.mode != DiscoveryMode::Softd {
            return Vec::new();
        }
        let cookie = self.next_cookie;
        let records: Vec<SwitchRecord> = self.switches.values().cloned().collect();
        let msgs = softd::softd_on_port_update(
            &mut self.view,
            &ControlMessage::PortUpdate {
                dpid: at,
                port_no,
                status,
            },
            &self.config,
            now,
            &records,
            self.slice_mac,
            cookie,
        );
        if !msgs.is_empty() {
            self.next_cookie += 1;
            self.forward_cookies.insert(cookie);
        }
        msgs.into_iter()
            .map(|msg| Outgoing { msg, discovery: true })
            .collect()
    }

    fn resolve_chassis(&self, f: &LldpFrame) -> Option<Dpid> {
        match self.config.profile.chassis_encoding {
            ChassisEncoding::MacAsId => {
                if f.chassis.subtype != CHASSIS_SUBTYPE_MAC {
                    return None;
                }
                let mac = MacAddr(f.chassis.value.as_slice().try_into().ok()?);
                self.switches.values().find(|r| r.local_mac == mac).map(|r| r.dpid)
            }
            ChassisEncoding::DpidAsId => {
                let d = Dpid(u64::from_be_bytes(f.chassis.value.as_slice().try_into().ok()?));
                self.switches.contains_key(&d).then_some(d)
            }
        }
    }

    /// Learns `chassis/port → (at, in_port)` from one packet-in.
    pub fn handle_packet_in(
        &mut self,
        at: Dpid,
        in_port: u16,
        payload: &[u8],
        cookie: u64,
        now: SimTime,
    ) -> PacketInVerdict {
        self.counters.packet_ins += 1;
        if let Some(r) = self.rounds.last_mut() {
            r.packet_ins += 1;
        }
        let verdict = self.classify(at, in_port, payload, cookie);
        match verdict {
            Ok(link) => {
                let stamp = match self.rounds.last() {
                    Some(r) if self.config.mode.is_periodic() => r.started_at,
                    _ => now,
                };
                let new = self.view.confirm(link, stamp);
                self.counters.confirmed += 1;
                if let Some(r) = self.rounds.last_mut() {
                    r.links_confirmed += 1;
                }
                PacketInVerdict::Confirmed { link, new }
            }
            Err(reason) => {
                *self.counters.rejected.entry(reason).or_default() += 1;
                if let Some(r) = self.rounds.last_mut() {
                    r.rejected_frames += 1;
                }
                PacketInVerdict::Rejected(reason)
            }
        }
    }

    fn classify(&self, at: Dpid, in_port: u16, payload: &[u8], cookie: u64) -> Result<DirectedLink, RejectReason> {
        let frame = LldpFrame::decode(payload).map_err(|_| RejectReason::NotLldp)?;
        if let Some(key) = &self.config.hmac_key {
            if frame.hmac.is_none() {
                return Err(RejectReason::MissingHmac);
            }
            if !verify_hmac(&frame, key) {
                return Err(RejectReason::BadHmac);
            }
        }
        if self.config.mode == DiscoveryMode::Softd && !self.forward_cookies.contains(&cookie) {
            return Err(RejectReason::NoForwardWindow);
        }
        let src = self.resolve_chassis(&frame).ok_or(RejectReason::UnknownChassis)?;
        let port_no = frame.port.as_port_no().ok_or(RejectReason::BadPortTlv)?;
        Ok(DirectedLink {
            src: PortId { dpid: src, port_no },
            dst: PortId {
                dpid: at,
                port_no: in_port,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lldp::{attach_hmac, ControllerProfile, HmacKey, IdTlv, OFDP_MULTICAST};

    fn features(d: u64, ports: &[u16]) -> SwitchFeatures {
        SwitchFeatures {
            dpid: Dpid(d),
            local_mac: Dpid(d).embedded_mac(),
            ports: ports.to_vec(),
        }
    }

    fn key() -> HmacKey {
        HmacKey::new(*b"sixteen byte key").unwrap()
    }

    fn controller(mode: DiscoveryMode) -> Controller {
        let mut cfg = DiscoveryConfig::new(mode);
        if mode == DiscoveryMode::Softd {
            cfg.hmac_key = Some(key());
        }
        let mut c = Controller::new(0, cfg, MacAddr([2, 0xc0, 0, 0, 0, 1]));
        c.connect(Dpid(1), features(1, &[1]));
        c.connect(Dpid(2), features(2, &[1]));
        c
    }

    fn probe_from(d: u64, port: u16) -> LldpFrame {
        ControllerProfile::pox_like().probe_frame(MacAddr([2, 0xc0, 0, 0, 0, 1]), Dpid(d), Dpid(d).embedded_mac(), port)
    }

    #[test]
    fn two_switch_packet_in_learns_link() {
        let mut c = controller(DiscoveryMode::Ofdp);
        c.start_round(SimTime::ZERO);
        let b = probe_from(1, 1).encode().unwrap();
        let v = c.handle_packet_in(Dpid(2), 1, &b, 0, SimTime::from_millis(1));
        let link = DirectedLink {
            src: PortId::new(1, 1),
            dst: PortId::new(2, 1),
        };
        assert_eq!(v, PacketInVerdict::Confirmed { link, new: true });
        assert_eq!(c.rounds()[0].packet_ins, 1);
    }

    #[test]
    fn softd_rejects_untagged_frames() {
        let mut c = controller(DiscoveryMode::Softd);
        let b = probe_from(1, 1).encode().unwrap();
        assert_eq!(
            c.handle_packet_in(Dpid(2), 1, &b, 1, SimTime::ZERO),
            PacketInVerdict::Rejected(RejectReason::MissingHmac)
        );
        assert!(c.view().is_empty());
        // a valid tag alone is not enough outside a forward window
        let signed = attach_hmac(&probe_from(1, 1), &key()).encode().unwrap();
        assert_eq!(
            c.handle_packet_in(Dpid(2), 1, &signed, 99, SimTime::ZERO),
            PacketInVerdict::Rejected(RejectReason::NoForwardWindow)
        );
    }

    #[test]
    fn spoofed_mac_in_chassis_creates_phantom() {
        let mut c = controller(DiscoveryMode::Ofdp);
        c.connect(Dpid(3), features(3, &[1, 2]));
        c.start_round(SimTime::ZERO);
        // frame claims chassis = s3's MAC, but arrives on s1/p1
        let mut f = probe_from(3, 2);
        f.dst_mac = OFDP_MULTICAST;
        let v = c.handle_packet_in(Dpid(1), 1, &f.encode().unwrap(), 0, SimTime::ZERO);
        assert!(matches!(v, PacketInVerdict::Confirmed { link, .. } if link.src == PortId::new(3, 2)));
    }

    #[test]
    fn mac_keyed_reconnect_takes_over_identity() {
        let mut c = controller(DiscoveryMode::Ofdp);
        c.connect(Dpid(4), features(4, &[1, 2]));
        let mut spoof = features(4, &[1, 2]);
        spoof.local_mac = Dpid(1).embedded_mac();
        let out = c.connect(Dpid(4), spoof);
        assert!(matches!(
            out,
            ConnectOutcome::Accepted {
                as_dpid: Dpid(1),
                replaced: Some(Dpid(1)),
                ..
            }
        ));
        assert_eq!(c.identity_of(Dpid(4)), Some(Dpid(1)));
        assert_eq!(c.identity_of(Dpid(1)), None);
        assert_eq!(c.conn_of(Dpid(1)), Some(Dpid(4)));
        assert!(c.records().all(|r| r.dpid != Dpid(4)));
    }

    #[test]
    fn channel_binding_refuses_foreign_identity() {
        let mut cfg = DiscoveryConfig::new(DiscoveryMode::Ofdp);
        cfg.profile.chassis_encoding = ChassisEncoding::DpidAsId;
        cfg.channel_binding = true;
        let mut c = Controller::new(0, cfg, MacAddr([2, 0, 0, 0, 0, 1]));
        c.connect(Dpid(1), features(1, &[1]));
        c.connect(Dpid(4), features(4, &[1]));
        assert_eq!(c.connect(Dpid(4), features(1, &[1])), ConnectOutcome::Rejected);
        assert_eq!(c.identity_of(Dpid(4)), Some(Dpid(4)));
        assert_eq!(c.conn_of(Dpid(1)), Some(Dpid(1)));
    }

    #[test]
    fn junk_is_counted_not_learned() {
        let mut c = controller(DiscoveryMode::Ofdp);
        c.start_round(SimTime::ZERO);
        assert_eq!(
            c.handle_packet_in(Dpid(1), 1, b"not a frame", 0, SimTime::ZERO),
            PacketInVerdict::Rejected(RejectReason::NotLldp)
        );
        let mut f = probe_from(9, 1);
        f.chassis = IdTlv::mac(MacAddr([9; 6]));
        assert_eq!(
            c.handle_packet_in(Dpid(1), 1, &f.encode().unwrap(), 0, SimTime::ZERO),
            PacketInVerdict::Rejected(RejectReason::UnknownChassis)
        );
        assert_eq!(c.rounds()[0].rejected_frames, 2);
        assert_eq!(c.counters().rejected_total(), 2);
    }
}
