//! Periodic discovery rounds.

use super::{DiscoveryConfig, RoundStats, SwitchRecord, TopologyView};
use crate::lldp::attach_hmac;
use crate::openflow::{ControlMessage, OFPP_ALL};
use crate::sim::SimTime;
use crate::topology::{DirectedLink, MacAddr};

/// One packet-out per switch port, each carrying its own probe.
pub fn ofdp_run_round(
    switches: &[SwitchRecord],
    config: &DiscoveryConfig,
    src_mac: MacAddr,
    now: SimTime,
) -> (Vec<ControlMessage>, RoundStats) {
    let mut out = Vec::new();
    for s in switches {
        for &p in &s.ports {
            let mut f = config.profile.probe_frame(src_mac, s.dpid, s.local_mac, p);
            if let Some(key) = &config.hmac_key {
                f = attach_hmac(&f, key);
            }
            out.push(ControlMessage::PacketOut {
                dpid: s.dpid,
                out_port: p,
                payload: f.encode().expect("probe frames are small"),
            });
        }
    }
    let stats = RoundStats {
        started_at: now,
        packet_outs: out.len() as u64,
        ..RoundStats::default()
    };
    (out, stats)
}

/// One packet-out per switch to `OFPP_ALL`; the switch fills in the port TLV.
pub fn ofdpv2_run_round(
    switches: &[SwitchRecord],
    config: &DiscoveryConfig,
    src_mac: MacAddr,
    now: SimTime,
) -> (Vec<ControlMessage>, RoundStats) {
    let out: Vec<ControlMessage> = switches
        .iter()
        .map(|s| ControlMessage::PacketOut {
            dpid: s.dpid,
            out_port: OFPP_ALL,
            payload: config
                .profile
                .probe_frame(src_mac, s.dpid, s.local_mac, 0)
                .encode()
                .expect("probe frames are small"),
        })
        .collect();
    let stats = RoundStats {
        started_at: now,
        packet_outs: out.len() as u64,
        ..RoundStats::default()
    };
    (out, stats)
}

/// Removes links not confirmed within `staleness_rounds · T`.
pub fn ofdp_age_links(view: &mut TopologyView, config: &DiscoveryConfig, now: SimTime) -> Vec<DirectedLink> {
    view.age(now, config.staleness_bound())
}
