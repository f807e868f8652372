//! Attacker models and their trace-derived outcomes.
//!
//! The runtime behaviour of each attacker lives in the world loop; this
//! module holds the declarative specs, frame crafting, and evaluation. An
//! outcome is a pure function of the trace and the final diff.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lldp::{fingerprint, ControllerProfile, HmacTag, IdTlv, LldpFrame, OFDP_MULTICAST, TAG_LEN};
use crate::sim::{ChannelId, DropReason, Origin, PacketKind, SimTime, TraceEntry, TraceOutcome};
use crate::topology::{DirectedLink, Dpid, GroundTruthTopology, HostId, MacAddr, PortId, TopologyDiff};

fn default_inject_interval() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttackerSpec {
    /// A compromised switch that sniffs the victim's identity and reconnects as it.
    SwitchSpoof {
        attacker: Dpid,
        victim: Dpid,
        #[serde(default)]
        start_s: f64,
    },
    /// Two hosts tunnelling LLDP frames to each other out of band.
    RelayFabrication {
        h1: HostId,
        h2: HostId,
        relay_latency_us: u64,
        #[serde(default)]
        answer_bfd: bool,
    },
    /// A host injecting crafted probes that claim to come from another switch port.
    InjectFabrication {
        host: HostId,
        claimed_dpid: Dpid,
        claimed_port: u16,
        #[serde(default = "default_inject_interval")]
        interval_s: f64,
        /// Append a random HMAC TLV to every forgery.
        #[serde(default)]
        forge_tag: bool,
        #[serde(default)]
        count: Option<u64>,
        #[serde(default)]
        start_s: f64,
    },
    LldpFlood {
        host: HostId,
        rate_pps: f64,
        duration_s: f64,
        #[serde(default)]
        start_s: f64,
    },
    /// A passive host matching received probes against a signature database.
    Fingerprint {
        host: HostId,
        #[serde(default)]
        signature_db: Option<Vec<ControllerProfile>>,
        #[serde(default)]
        answer_bfd: bool,
    },
}

impl AttackerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AttackerSpec::SwitchSpoof { .. } => "switch-spoof",
            AttackerSpec::RelayFabrication { .. } => "relay-fabrication",
            AttackerSpec::InjectFabrication { .. } => "inject-fabrication",
            AttackerSpec::LldpFlood { .. } => "lldp-flood",
            AttackerSpec::Fingerprint { .. } => "fingerprint",
        }
    }

    /// Hosts this attacker controls.
    pub fn hosts(&self) -> Vec<&HostId> {
        match self {
            AttackerSpec::SwitchSpoof { .. } => vec![],
            AttackerSpec::RelayFabrication { h1, h2, .. } => vec![h1, h2],
            AttackerSpec::InjectFabrication { host, .. }
            | AttackerSpec::LldpFlood { host, .. }
            | AttackerSpec::Fingerprint { host, .. } => vec![host],
        }
    }

    pub fn answers_bfd(&self) -> bool {
        match self {
            AttackerSpec::RelayFabrication { answer_bfd, .. } | AttackerSpec::Fingerprint { answer_bfd, .. } => {
                *answer_bfd
            }
            _ => false,
        }
    }

    /// Checks references against the topology; one message per problem.
    pub fn validate(&self, truth: &GroundTruthTopology) -> Vec<String> {
        let mut errs = Vec::new();
        for h in self.hosts() {
            if truth.host(h).is_none() {
                errs.push(format!("{}: unknown host {h}", self.kind_name()));
            }
        }
        match self {
            AttackerSpec::SwitchSpoof { attacker, victim, start_s } => {
                for d in [attacker, victim] {
                    if truth.switch(*d).is_none() {
                        errs.push(format!("switch-spoof: unknown switch {d}"));
                    }
                }
                if attacker == victim {
                    errs.push("switch-spoof: attacker and victim are the same switch".into());
                }
                if !(*start_s >= 0.0) {
                    errs.push("switch-spoof: start_s must be non-negative".into());
                }
            }
            AttackerSpec::RelayFabrication { h1, h2, .. } if h1 == h2 => {
                errs.push("relay-fabrication: h1 and h2 must differ".into());
            }
            AttackerSpec::InjectFabrication { interval_s, start_s, .. } => {
                if !(*interval_s > 0.0) {
                    errs.push("inject-fabrication: interval_s must be positive".into());
                }
                if !(*start_s >= 0.0) {
                    errs.push("inject-fabrication: start_s must be non-negative".into());
                }
            }
            AttackerSpec::LldpFlood { rate_pps, duration_s, start_s, .. } => {
                if !(*rate_pps >= 0.0) || !(*duration_s >= 0.0) || !(*start_s >= 0.0) {
                    errs.push("lldp-flood: rate_pps, duration_s and start_s must be non-negative".into());
                }
            }
            AttackerSpec::Fingerprint {
                signature_db: Some(db), ..
            } => {
                if let Err(e) = crate::lldp::validate_profiles(db) {
                    errs.push(format!("fingerprint: {e}"));
                }
            }
            _ => {}
        }
        errs
    }
}

/// A forged probe claiming `(claimed_dpid, claimed_port)` in the given
/// profile's format. With `forge_tag` a random HMAC TLV is appended.
pub fn forge_frame(
    profile: &ControllerProfile,
    src_mac: MacAddr,
    claimed_dpid: Dpid,
    claimed_mac: MacAddr,
    claimed_port: u16,
    forge_tag: bool,
    rng: &mut impl Rng,
) -> LldpFrame {
    let mut f = profile.probe_frame(src_mac, claimed_dpid, claimed_mac, claimed_port);
    if forge_tag {
        let mut tag = [0u8; TAG_LEN];
        rng.fill(&mut tag);
        let nonce = rng.random_bool(0.5).then(|| rng.random());
        f.hmac = Some(HmacTag { nonce, tag });
    }
    f
}

/// A random well-formed LLDP frame; its chassis belongs to no switch.
pub fn flood_frame(rng: &mut impl Rng) -> LldpFrame {
    let mut mac = [0u8; 6];
    rng.fill(&mut mac);
    // locally administered unicast, disjoint from the switch MAC plan
    mac[0] = 0x06;
    let mut f = LldpFrame::probe(
        MacAddr(mac),
        IdTlv::mac(MacAddr(mac)),
        IdTlv::port(rng.random_range(1..=u16::MAX)),
        120,
    );
    f.dst_mac = OFDP_MULTICAST;
    f
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloodStats {
    pub frames_sent: u64,
    /// Flood frames that the attachment switch sent up as packet-ins.
    pub controller_bound: u64,
    pub controller_bound_in_window: u64,
    pub controller_bound_outside_window: u64,
    /// Overload drops on the attachment switch's control channels.
    pub control_channel_drops: u64,
    /// Packet-ins not carrying flood frames that were dropped anywhere.
    pub legit_packet_in_drops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub index: usize,
    pub kind: String,
    pub succeeded: bool,
    pub phantom_links: Vec<DirectedLink>,
    pub frames_sent: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_to_success_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_identified: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_frames: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmac_bypassed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flood: Option<FloodStats>,
}

/// Everything an outcome may depend on.
pub struct Evidence<'a> {
    pub trace: &'a [TraceEntry],
    /// Final diff of the first controller's view against the final truth.
    pub diff: &'a TopologyDiff,
    pub truth: &'a GroundTruthTopology,
    pub hmac_enabled: bool,
}

fn host_port(truth: &GroundTruthTopology, h: &HostId) -> Option<PortId> {
    truth.host(h)
}

fn by_attacker(e: &TraceEntry, index: usize) -> bool {
    e.meta.origin == Origin::Attacker { index }
}

fn is_packet_in_from(e: &TraceEntry, p: PortId) -> bool {
    e.meta.kind == PacketKind::PacketIn && e.meta.dpid == Some(p.dpid) && e.meta.port == Some(p.port_no)
}

fn first_arrival<'a>(it: impl Iterator<Item = &'a TraceEntry>) -> Option<f64> {
    it.filter_map(TraceEntry::arrival).min().map(SimTime::as_secs_f64)
}

pub fn evaluate(index: usize, spec: &AttackerSpec, ev: &Evidence) -> AttackOutcome {
    let mut out = AttackOutcome {
        index,
        kind: spec.kind_name().to_string(),
        succeeded: false,
        phantom_links: Vec::new(),
        frames_sent: ev.trace.iter().filter(|e| by_attacker(e, index)).count() as u64,
        time_to_success_s: None,
        controller_identified: None,
        observed_frames: None,
        hmac_bypassed: None,
        flood: None,
    };
    match spec {
        AttackerSpec::SwitchSpoof { victim, .. } => {
            out.phantom_links = ev
                .diff
                .phantom_links
                .iter()
                .filter(|l| l.src.dpid == *victim || l.dst.dpid == *victim)
                .copied()
                .collect();
            out.succeeded = !out.phantom_links.is_empty();
            if out.succeeded {
                out.time_to_success_s = first_arrival(
                    ev.trace
                        .iter()
                        .filter(|e| by_attacker(e, index) && e.meta.kind == PacketKind::Hello),
                );
            }
        }
        AttackerSpec::RelayFabrication { h1, h2, .. } => {
            if let (Some(a), Some(b)) = (host_port(ev.truth, h1), host_port(ev.truth, h2)) {
                out.phantom_links = ev
                    .diff
                    .phantom_links
                    .iter()
                    .filter(|l| (l.src == a && l.dst == b) || (l.src == b && l.dst == a))
                    .copied()
                    .collect();
                out.succeeded = !out.phantom_links.is_empty();
                if out.succeeded {
                    let relayed: BTreeSet<&[u8]> = ev
                        .trace
                        .iter()
                        .filter(|e| by_attacker(e, index) && e.meta.kind == PacketKind::Relay)
                        .filter_map(|e| e.meta.payload.as_deref())
                        .collect();
                    out.time_to_success_s = first_arrival(ev.trace.iter().filter(|e| {
                        (is_packet_in_from(e, a) || is_packet_in_from(e, b))
                            && e.meta.payload.as_deref().is_some_and(|p| relayed.contains(p))
                    }));
                }
            }
            out.hmac_bypassed = Some(ev.hmac_enabled && out.succeeded);
        }
        AttackerSpec::InjectFabrication {
            host,
            claimed_dpid,
            claimed_port,
            ..
        } => {
            if let Some(at) = host_port(ev.truth, host) {
                let target = DirectedLink {
                    src: PortId {
                        dpid: *claimed_dpid,
                        port_no: *claimed_port,
                    },
                    dst: at,
                };
                out.phantom_links = ev.diff.phantom_links.iter().filter(|l| **l == target).copied().collect();
                out.succeeded = !out.phantom_links.is_empty();
                if out.succeeded {
                    let forged: BTreeSet<&[u8]> = ev
                        .trace
                        .iter()
                        .filter(|e| by_attacker(e, index))
                        .filter_map(|e| e.meta.payload.as_deref())
                        .collect();
                    out.time_to_success_s = first_arrival(ev.trace.iter().filter(|e| {
                        is_packet_in_from(e, at) && e.meta.payload.as_deref().is_some_and(|p| forged.contains(p))
                    }));
                }
            }
        }
        AttackerSpec::LldpFlood { host, .. } => {
            let stats = flood_stats(index, host, ev);
            out.succeeded = stats.legit_packet_in_drops > 0;
            out.flood = Some(stats);
        }
        AttackerSpec::Fingerprint { host, signature_db, .. } => {
            let db = signature_db.clone().unwrap_or_else(crate::lldp::builtin_profiles);
            let mut seen: Vec<(SimTime, &[u8])> = ev
                .trace
                .iter()
                .filter(|e| e.channel == ChannelId::HostDown { host: host.clone() } && e.meta.kind == PacketKind::Lldp)
                .filter_map(|e| Some((e.arrival()?, e.meta.payload.as_deref()?)))
                .collect();
            seen.sort();
            out.observed_frames = Some(seen.len() as u64);
            if let [(t1, first), (t2, _), ..] = seen[..] {
                if let Ok(f) = LldpFrame::decode(first) {
                    let period = (t2 - t1).as_secs_f64();
                    out.controller_identified = fingerprint(&f, Some(period), &db);
                }
                if out.controller_identified.is_some() {
                    out.succeeded = true;
                    out.observed_frames = Some(2);
                    out.time_to_success_s = Some(t2.as_secs_f64());
                }
            }
        }
    }
    out
}

fn flood_stats(index: usize, host: &HostId, ev: &Evidence) -> FloodStats {
    let mut s = FloodStats::default();
    let Some(at) = host_port(ev.truth, host) else {
        return s;
    };
    let flood: BTreeSet<&[u8]> = ev
        .trace
        .iter()
        .filter(|e| by_attacker(e, index) && e.meta.kind == PacketKind::Lldp)
        .filter_map(|e| e.meta.payload.as_deref())
        .collect();
    s.frames_sent = flood.len() as u64;
    // forward windows opened on the attachment switch
    let windows: Vec<(SimTime, SimTime)> = ev
        .trace
        .iter()
        .filter(|e| e.meta.kind == PacketKind::FlowMod && e.meta.dpid == Some(at.dpid))
        .filter_map(|e| Some((e.arrival()?, e.meta.hard_timeout_us?)))
        .map(|(a, t)| (a, a + SimTime(t)))
        .collect();
    for e in ev.trace.iter().filter(|e| e.meta.kind == PacketKind::PacketIn) {
        let is_flood = e.meta.payload.as_deref().is_some_and(|p| flood.contains(p));
        if is_flood && e.meta.dpid == Some(at.dpid) {
            s.controller_bound += 1;
            if windows.iter().any(|&(a, b)| e.sent_at >= a && e.sent_at < b) {
                s.controller_bound_in_window += 1;
            } else {
                s.controller_bound_outside_window += 1;
            }
        }
        if !is_flood && !e.delivered() {
            s.legit_packet_in_drops += 1;
        }
    }
    s.control_channel_drops = ev
        .trace
        .iter()
        .filter(|e| {
            matches!(&e.channel, ChannelId::ControlUp { dpid, .. } if *dpid == at.dpid)
                && e.outcome
                    == TraceOutcome::Dropped {
                        reason: DropReason::Overload,
                    }
        })
        .count() as u64;
    s
}
