//! Event-driven authenticated discovery.
//!
//! Switches drop LLDP by default. A port coming up opens a short forward
//! window on every switch and sends one signed probe out of that port.

use super::{DiscoveryConfig, SwitchRecord, TopologyView, FORWARD_WINDOW};
use crate::lldp::attach_hmac;
use crate::openflow::{
    ControlMessage, FastFailoverGroup, FlowAction, FlowMatch, FlowRule, LivenessSource, PortStatus,
    DROP_LLDP_PRIORITY, FORWARD_RULE_PRIORITY,
};
use crate::sim::SimTime;
use crate::topology::{MacAddr, PortId};

pub const LIVENESS_GROUP_ID: u32 = 1;

/// Sent once when a switch connects.
pub fn softd_provisioning(rec: &SwitchRecord) -> Vec<ControlMessage> {
    vec![
        ControlMessage::FlowMod {
            dpid: rec.dpid,
            rule: FlowRule::new(FlowMatch::LldpEthertype, FlowAction::Drop, DROP_LLDP_PRIORITY),
        },
        ControlMessage::GroupMod {
            dpid: rec.dpid,
            group: FastFailoverGroup {
                group_id: LIVENESS_GROUP_ID,
                watched_ports: rec.ports.clone(),
                liveness: LivenessSource::Bfd,
            },
        },
    ]
}

/// Reacts to a port-update. Down removes the links touching the port; up
/// returns the forward-rule flow-mods followed by the signed probe.
pub fn softd_on_port_update(
    view: &mut TopologyView,
    msg: &ControlMessage,
    config: &DiscoveryConfig,
    _now: SimTime,
    switches: &[SwitchRecord],
    src_mac: MacAddr,
    cookie: u64,
) -> Vec<ControlMessage> {
    let ControlMessage::PortUpdate { dpid, port_no, status } = *msg else {
        return Vec::new();
    };
    match status {
        PortStatus::Down => {
            view.remove_port(PortId { dpid, port_no });
            Vec::new()
        }
        PortStatus::Up => {
            let Some(key) = &config.hmac_key else {
                return Vec::new();
            };
            let Some(rec) = switches.iter().find(|r| r.dpid == dpid) else {
                return Vec::new();
            };
            let mut out: Vec<ControlMessage> = switches
                .iter()
                .map(|s| ControlMessage::FlowMod {
                    dpid: s.dpid,
                    rule: FlowRule::new(FlowMatch::LldpEthertype, FlowAction::ToController, FORWARD_RULE_PRIORITY)
                        .with_timeout(FORWARD_WINDOW)
                        .with_cookie(cookie),
                })
                .collect();
            let probe = attach_hmac(&config.profile.probe_frame(src_mac, dpid, rec.local_mac, port_no), key);
            out.push(ControlMessage::PacketOut {
                dpid,
                out_port: port_no,
                payload: probe.encode().expect("probe frames are small"),
            });
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::DiscoveryMode;
    use crate::lldp::{verify_hmac, HmacKey, LldpFrame};
    use crate::openflow::{SwitchEffect, SwitchState};
    use crate::topology::{DirectedLink, Dpid};

    fn recs() -> Vec<SwitchRecord> {
        [1u64, 2]
            .iter()
            .map(|&d| SwitchRecord {
                dpid: Dpid(d),
                local_mac: Dpid(d).embedded_mac(),
                ports: vec![1],
                conn: Dpid(d),
            })
            .collect()
    }

    fn cfg() -> DiscoveryConfig {
        DiscoveryConfig::new(DiscoveryMode::Softd).with_key(HmacKey::new(vec![9; 16]).unwrap())
    }

    const SRC: MacAddr = MacAddr::new([2, 0, 0, 0, 0, 1]);

    #[test]
    fn port_up_opens_window_and_probes() {
        let cfg = cfg();
        let mut v = TopologyView::new();
        let up = ControlMessage::PortUpdate {
            dpid: Dpid(1),
            port_no: 1,
            status: PortStatus::Up,
        };
        let out = softd_on_port_update(&mut v, &up, &cfg, SimTime::ZERO, &recs(), SRC, 7);
        assert_eq!(out.len(), 3);
        let mut peer = SwitchState::new(Dpid(2), [1]);
        for m in &out[..2] {
            let ControlMessage::FlowMod { rule, .. } = m else {
                panic!("expected flow-mod")
            };
            assert_eq!(rule.hard_timeout, Some(FORWARD_WINDOW));
            assert_eq!(rule.priority, FORWARD_RULE_PRIORITY);
        }
        for m in softd_provisioning(&recs()[1]) {
            if let ControlMessage::FlowMod { rule, .. } = m {
                peer.install_flow(rule, SimTime::ZERO);
            }
        }
        let ControlMessage::FlowMod { rule, .. } = &out[1] else { unreachable!() };
        peer.install_flow(rule.clone(), SimTime::ZERO);
        let ControlMessage::PacketOut { dpid, out_port, payload } = &out[2] else {
            panic!("expected packet-out")
        };
        assert_eq!((*dpid, *out_port), (Dpid(1), 1));
        assert!(verify_hmac(&LldpFrame::decode(payload).unwrap(), cfg.hmac_key.as_ref().unwrap()));
        // inside the window the probe reaches the controller with the cookie
        assert!(matches!(
            peer.handle_packet(1, payload, SimTime::from_millis(500))[..],
            [SwitchEffect::PacketIn { cookie: 7, .. }]
        ));
        // after it, the default drop applies again
        assert_eq!(peer.handle_packet(1, payload, FORWARD_WINDOW), vec![SwitchEffect::Drop]);
    }

    #[test]
    fn port_down_removes_both_directions() {
        let mut v = TopologyView::new();
        let a = DirectedLink {
            src: PortId::new(1, 1),
            dst: PortId::new(2, 1),
        };
        v.confirm(a, SimTime::ZERO);
        v.confirm(a.reversed(), SimTime::ZERO);
        let down = ControlMessage::PortUpdate {
            dpid: Dpid(2),
            port_no: 1,
            status: PortStatus::Down,
        };
        assert!(softd_on_port_update(&mut v, &down, &cfg(), SimTime::ZERO, &recs(), SRC, 1).is_empty());
        assert!(v.is_empty());
    }

    #[test]
    fn provisioning_drops_lldp_and_watches_ports() {
        let msgs = softd_provisioning(&recs()[0]);
        let mut s = SwitchState::new(Dpid(1), [1]);
        for m in msgs {
            match m {
                ControlMessage::FlowMod { rule, .. } => s.install_flow(rule, SimTime::ZERO),
                ControlMessage::GroupMod { group, .. } => s.install_group(group),
                _ => unreachable!(),
            }
        }
        assert!(s.is_watched(1));
        let probe = LldpFrame::probe(SRC, crate::lldp::IdTlv::mac(SRC), crate::lldp::IdTlv::port(1), 120);
        assert_eq!(
            s.handle_packet(1, &probe.encode().unwrap(), SimTime::ZERO),
            vec![SwitchEffect::Drop]
        );
    }
}
