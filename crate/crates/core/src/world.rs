//! The simulated network: switches, hosts, attackers and controllers wired
//! through channels on one event loop.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::attacks::{flood_frame, forge_frame, AttackerSpec};
use crate::discovery::{BfdSession, BfdState, ConnectOutcome, Controller, Outgoing, SwitchFeatures};
use crate::lldp::{LldpFrame, CHASSIS_SUBTYPE_LOCAL, CHASSIS_SUBTYPE_MAC};
use crate::openflow::{ControlMessage, SwitchEffect, SwitchState};
use crate::scenario::{ChannelsSpec, Scenario};
use crate::sim::{Channel, ChannelId, DropReason, Engine, Handler, Origin, PacketKind, PacketMeta, SimError, SimTime};
use crate::topology::{
    diff, Attachment, DirectedLink, Dpid, GroundTruthTopology, HostId, MacAddr, PortId, TopologyDiff, TopologyEvent,
    TopologyEventKind,
};

/// Source MAC stamped on controller `index`'s probes.
pub fn slice_mac(index: usize) -> MacAddr {
    MacAddr([0x02, 0xc0, 0, 0, 0, (index + 1) as u8])
}

#[derive(Debug, Clone)]
pub enum Ev {
    Round { controller: usize },
    ToSwitch { controller: usize, conn: Dpid, msg: ControlMessage },
    ToController { controller: usize, conn: Dpid, msg: ControlMessage },
    Hello { controller: usize, conn: Dpid, features: SwitchFeatures },
    Frame { at: PortId, bytes: Vec<u8> },
    BfdHello { at: PortId },
    HostFrame { host: HostId, bytes: Vec<u8> },
    HostBfd { host: HostId },
    RelayArrive { attacker: usize, to: HostId, bytes: Vec<u8> },
    BfdTick { at: PortId, generation: u64 },
    Topology { index: usize, event: TopologyEvent },
    AttackStep { attacker: usize, k: u64 },
    Sample,
}

struct SwitchNode {
    state: SwitchState,
    bfd: BTreeMap<u16, BfdSession>,
    generation: u64,
}

struct Actor {
    spec: AttackerSpec,
    captured: bool,
}

/// Convergence bookkeeping for one topology event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventConvergence {
    pub index: usize,
    pub at: SimTime,
    pub kind: String,
    /// First time the first controller's view matched the truth again.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged_at: Option<SimTime>,
    /// For link-down: first time neither direction was reported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links_removed_at: Option<SimTime>,
    #[serde(skip)]
    cut: Option<[DirectedLink; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffSample {
    pub t_s: u64,
    pub phantom: usize,
    pub missing: usize,
}

pub struct World {
    truth: GroundTruthTopology,
    switches: BTreeMap<Dpid, SwitchNode>,
    controllers: Vec<Controller>,
    channels: BTreeMap<ChannelId, Channel>,
    models: ChannelsSpec,
    actors: Vec<Actor>,
    host_actors: BTreeMap<HostId, Vec<usize>>,
    spoofers: BTreeMap<Dpid, usize>,
    duration: SimTime,
    convergence: Vec<EventConvergence>,
    samples: Vec<DiffSample>,
    next_generation: u64,
}

/// Everything left once the run has finished.
pub struct RunState {
    pub truth: GroundTruthTopology,
    pub controllers: Vec<Controller>,
    pub convergence: Vec<EventConvergence>,
    pub samples: Vec<DiffSample>,
}

impl World {
    pub fn new(scn: &Scenario) -> Self {
        let controllers = (0..scn.spec.controllers)
            .map(|i| Controller::new(i, scn.config.clone(), slice_mac(i)))
            .collect();
        let mut host_actors: BTreeMap<HostId, Vec<usize>> = BTreeMap::new();
        let mut spoofers = BTreeMap::new();
        for (i, a) in scn.spec.attackers.iter().enumerate() {
            for h in a.hosts() {
                host_actors.entry(h.clone()).or_default().push(i);
            }
            if let AttackerSpec::SwitchSpoof { attacker, .. } = a {
                spoofers.insert(*attacker, i);
            }
        }
        let mut w = World {
            truth: scn.truth.clone(),
            switches: BTreeMap::new(),
            controllers,
            channels: BTreeMap::new(),
            models: scn.spec.channels.clone(),
            actors: scn
                .spec
                .attackers
                .iter()
                .map(|a| Actor {
                    spec: a.clone(),
                    captured: false,
                })
                .collect(),
            host_actors,
            spoofers,
            duration: scn.spec.duration(),
            convergence: Vec::new(),
            samples: Vec::new(),
            next_generation: 0,
        };
        let dpids: Vec<Dpid> = w.truth.switches().map(|s| s.dpid).collect();
        for d in dpids {
            w.add_node(d);
        }
        w
    }

    fn add_node(&mut self, d: Dpid) {
        let Some(info) = self.truth.switch(d) else { return };
        self.next_generation += 1;
        self.switches.insert(
            d,
            SwitchNode {
                state: SwitchState::new(d, info.ports.keys().copied()),
                bfd: BTreeMap::new(),
                generation: self.next_generation,
            },
        );
    }

    fn features(&self, d: Dpid) -> Option<SwitchFeatures> {
        let info = self.truth.switch(d)?;
        Some(SwitchFeatures {
            dpid: d,
            local_mac: info.local_port_mac,
            ports: info.ports.keys().copied().collect(),
        })
    }

    /// Connects every switch, then schedules rounds, samples, events and attackers.
    pub fn bootstrap(&mut self, sim: &mut Engine<Ev>, scn: &Scenario) -> Result<(), SimError> {
        let dpids: Vec<Dpid> = self.switches.keys().copied().collect();
        for c in 0..self.controllers.len() {
            for &d in &dpids {
                let f = self.features(d).expect("node mirrors truth");
                self.finish_connect(sim, c, d, f)?;
            }
        }
        if scn.config.mode.is_periodic() {
            for c in 0..self.controllers.len() {
                sim.schedule(SimTime::ZERO, Ev::Round { controller: c })?;
            }
        }
        sim.schedule(SimTime::ZERO, Ev::Sample)?;
        for (index, e) in scn.spec.events.iter().enumerate() {
            sim.schedule(e.at, Ev::Topology { index, event: e.clone() })?;
        }
        for (i, a) in self.actors.iter().enumerate() {
            let start = match &a.spec {
                AttackerSpec::InjectFabrication { start_s, .. } | AttackerSpec::LldpFlood { start_s, .. } => *start_s,
                _ => continue,
            };
            let at = SimTime::from_secs_f64(start);
            if at <= self.duration {
                sim.schedule(at, Ev::AttackStep { attacker: i, k: 0 })?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> RunState {
        RunState {
            truth: self.truth,
            controllers: self.controllers,
            convergence: self.convergence,
            samples: self.samples,
        }
    }

    fn send(&mut self, sim: &mut Engine<Ev>, id: ChannelId, meta: PacketMeta, ev: Ev) -> Result<(), SimError> {
        let models = &self.models;
        let ch = self
            .channels
            .entry(id.clone())
            .or_insert_with(|| Channel::new(id.clone(), models.model_for(&id)));
        sim.transmit(ch, meta, ev)?;
        Ok(())
    }

    fn finish_connect(&mut self, sim: &mut Engine<Ev>, c: usize, conn: Dpid, f: SwitchFeatures) -> Result<(), SimError> {
        if let ConnectOutcome::Accepted { provisioning, .. } = self.controllers[c].connect(conn, f) {
            for msg in provisioning {
                self.send_to_switch(sim, c, conn, Outgoing { msg, discovery: false })?;
            }
        }
        Ok(())
    }

    fn send_to_switch(&mut self, sim: &mut Engine<Ev>, c: usize, conn: Dpid, out: Outgoing) -> Result<(), SimError> {
        let mut meta = PacketMeta::new(out.msg.kind(), Origin::Controller { index: c })
            .discovery(out.discovery)
            .controller(c)
            .dpid(conn);
        match &out.msg {
            ControlMessage::PacketOut { out_port, payload, .. } => meta = meta.port(*out_port).payload(payload),
            ControlMessage::FlowMod { rule, .. } => meta = meta.hard_timeout(rule.hard_timeout),
            _ => {}
        }
        let id = ChannelId::ControlDown { controller: c, dpid: conn };
        self.send(
            sim,
            id,
            meta,
            Ev::ToSwitch {
                controller: c,
                conn,
                msg: out.msg,
            },
        )
    }

    fn dispatch(&mut self, sim: &mut Engine<Ev>, c: usize, outs: Vec<Outgoing>) -> Result<(), SimError> {
        for out in outs {
            if let Some(conn) = self.controllers[c].conn_of(out.msg.dpid()) {
                self.send_to_switch(sim, c, conn, out)?;
            }
        }
        Ok(())
    }

    fn send_to_controller(&mut self, sim: &mut Engine<Ev>, c: usize, conn: Dpid, msg: ControlMessage) -> Result<(), SimError> {
        if self.controllers[c].identity_of(conn).is_none() {
            return Ok(());
        }
        let mut meta = PacketMeta::new(msg.kind(), Origin::Switch { dpid: conn })
            .discovery(true)
            .controller(c)
            .dpid(conn);
        match &msg {
            ControlMessage::PacketIn { in_port, payload, .. } => meta = meta.port(*in_port).payload(payload),
            ControlMessage::PortUpdate { port_no, .. } => meta = meta.port(*port_no),
            _ => {}
        }
        self.send(
            sim,
            ChannelId::ControlUp { controller: c, dpid: conn },
            meta,
            Ev::ToController {
                controller: c,
                conn,
                msg,
            },
        )
    }

    /// Puts a data-plane frame on whatever is wired to `from`.
    fn emit(&mut self, sim: &mut Engine<Ev>, from: PortId, bytes: Option<Vec<u8>>, origin: Origin) -> Result<(), SimError> {
        let kind = if bytes.is_some() { PacketKind::Lldp } else { PacketKind::Bfd };
        let mut meta = PacketMeta::new(kind, origin).dpid(from.dpid).port(from.port_no);
        if let Some(b) = &bytes {
            meta = meta.payload(b);
        }
        let attached = self.truth.port(from).map(|p| p.attached.clone());
        match attached {
            Some(Attachment::SwitchLink(peer)) => {
                let ev = match bytes {
                    Some(bytes) => Ev::Frame { at: peer, bytes },
                    None => Ev::BfdHello { at: peer },
                };
                self.send(sim, ChannelId::Link { from }, meta, ev)
            }
            Some(Attachment::HostLink(host)) => {
                let ev = match bytes {
                    Some(bytes) => Ev::HostFrame { host: host.clone(), bytes },
                    None => Ev::HostBfd { host: host.clone() },
                };
                self.send(sim, ChannelId::HostDown { host }, meta, ev)
            }
            _ => {
                sim.record_drop(ChannelId::Unattached { from }, meta, DropReason::NoPeer);
                Ok(())
            }
        }
    }

    /// A host of attacker `index` sends bytes (or a BFD hello) into its switch.
    fn host_send(&mut self, sim: &mut Engine<Ev>, host: &HostId, index: usize, bytes: Option<Vec<u8>>) -> Result<(), SimError> {
        let Some(at) = self.truth.host(host) else { return Ok(()) };
        let kind = if bytes.is_some() { PacketKind::Lldp } else { PacketKind::Bfd };
        let mut meta = PacketMeta::new(kind, Origin::Attacker { index }).dpid(at.dpid).port(at.port_no);
        if let Some(b) = &bytes {
            meta = meta.payload(b);
        }
        let ev = match bytes {
            Some(bytes) => Ev::Frame { at, bytes },
            None => Ev::BfdHello { at },
        };
        self.send(sim, ChannelId::HostUp { host: host.clone() }, meta, ev)
    }

    fn port_update(&mut self, sim: &mut Engine<Ev>, conn: Dpid, msg: ControlMessage) -> Result<(), SimError> {
        for c in 0..self.controllers.len() {
            self.send_to_controller(sim, c, conn, msg.clone())?;
        }
        Ok(())
    }

    fn on_to_switch(&mut self, sim: &mut Engine<Ev>, c: usize, conn: Dpid, msg: ControlMessage) -> Result<(), SimError> {
        let now = sim.now();
        let Some(node) = self.switches.get_mut(&conn) else { return Ok(()) };
        match msg {
            ControlMessage::PacketOut { out_port, payload, .. } => {
                let copies = node.state.packet_out(out_port, &payload);
                for (p, bytes) in copies {
                    self.emit(sim, PortId { dpid: conn, port_no: p }, Some(bytes), Origin::Controller { index: c })?;
                }
            }
            ControlMessage::FlowMod { mut rule, .. } => {
                if self.controllers.len() > 1 {
                    rule.matcher = rule.matcher.within_slice(self.controllers[c].slice_mac());
                }
                node.state.expire_flows(now);
                node.state.install_flow(rule, now);
            }
            ControlMessage::GroupMod { group, .. } => {
                let gen = node.generation;
                let fresh: Vec<u16> = group
                    .watched_ports
                    .iter()
                    .copied()
                    .filter(|p| node.state.has_port(*p) && !node.bfd.contains_key(p))
                    .collect();
                let cfg = self.controllers[c].config().bfd;
                for &p in &fresh {
                    node.bfd.insert(p, BfdSession::new(cfg));
                }
                node.state.install_group(group);
                for p in fresh {
                    sim.schedule(
                        now,
                        Ev::BfdTick {
                            at: PortId { dpid: conn, port_no: p },
                            generation: gen,
                        },
                    )?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Lets a spoofing switch grab the victim's identity from a probe.
    fn try_capture(&mut self, sim: &mut Engine<Ev>, at: PortId, bytes: &[u8]) -> Result<bool, SimError> {
        let Some(&i) = self.spoofers.get(&at.dpid) else { return Ok(false) };
        let AttackerSpec::SwitchSpoof { victim, start_s, .. } = self.actors[i].spec else {
            return Ok(false);
        };
        if self.actors[i].captured || sim.now() < SimTime::from_secs_f64(start_s) {
            return Ok(false);
        }
        let from_victim = matches!(
            self.truth.port(at).map(|p| &p.attached),
            Some(Attachment::SwitchLink(peer)) if peer.dpid == victim
        );
        let Ok(frame) = LldpFrame::decode(bytes) else { return Ok(false) };
        if !from_victim {
            return Ok(false);
        }
        self.actors[i].captured = true;
        let Some(mut features) = self.features(at.dpid) else { return Ok(true) };
        let v = &frame.chassis.value;
        match frame.chassis.subtype {
            CHASSIS_SUBTYPE_MAC if v.len() == 6 => features.local_mac = MacAddr(v[..].try_into().expect("length checked")),
            CHASSIS_SUBTYPE_LOCAL if v.len() == 8 => {
                features.dpid = Dpid(u64::from_be_bytes(v[..].try_into().expect("length checked")))
            }
            _ => {}
        }
        for c in 0..self.controllers.len() {
            let meta = PacketMeta::new(PacketKind::Hello, Origin::Attacker { index: i })
                .controller(c)
                .dpid(at.dpid);
            self.send(
                sim,
                ChannelId::ControlUp {
                    controller: c,
                    dpid: at.dpid,
                },
                meta,
                Ev::Hello {
                    controller: c,
                    conn: at.dpid,
                    features: features.clone(),
                },
            )?;
        }
        Ok(true)
    }

    fn on_frame(&mut self, sim: &mut Engine<Ev>, at: PortId, bytes: Vec<u8>) -> Result<(), SimError> {
        if !self.switches.contains_key(&at.dpid) || self.try_capture(sim, at, &bytes)? {
            return Ok(());
        }
        let now = sim.now();
        let effects = self.switches[&at.dpid].state.handle_packet(at.port_no, &bytes, now);
        for e in effects {
            match e {
                SwitchEffect::PacketIn { in_port, payload, cookie } => {
                    let src = crate::lldp::src_mac_of(&payload);
                    let c = self.controllers.iter().position(|c| Some(c.slice_mac()) == src).unwrap_or(0);
                    let msg = ControlMessage::PacketIn {
                        dpid: at.dpid,
                        in_port,
                        payload,
                        cookie,
                    };
                    self.send_to_controller(sim, c, at.dpid, msg)?;
                }
                SwitchEffect::Forward { out_port, payload } => {
                    self.emit(sim, PortId { dpid: at.dpid, port_no: out_port }, Some(payload), Origin::Switch { dpid: at.dpid })?;
                }
                SwitchEffect::Drop => {}
            }
        }
        Ok(())
    }

    fn on_bfd_hello(&mut self, sim: &mut Engine<Ev>, at: PortId) -> Result<(), SimError> {
        let now = sim.now();
        let Some(node) = self.switches.get_mut(&at.dpid) else { return Ok(()) };
        let Some(s) = node.bfd.get_mut(&at.port_no) else { return Ok(()) };
        if s.on_rx() == Some(BfdState::Up) {
            if let Ok(Some(msg)) = node.state.port_liveness_change(at.port_no, true, now) {
                self.port_update(sim, at.dpid, msg)?;
            }
        }
        Ok(())
    }

    fn on_bfd_tick(&mut self, sim: &mut Engine<Ev>, at: PortId, generation: u64) -> Result<(), SimError> {
        let now = sim.now();
        let Some(node) = self.switches.get_mut(&at.dpid) else { return Ok(()) };
        if node.generation != generation {
            return Ok(());
        }
        let Some(s) = node.bfd.get_mut(&at.port_no) else { return Ok(()) };
        let tx = s.config().tx_interval;
        let down = s.on_tick() == Some(BfdState::Down);
        let update = if down {
            node.state.port_liveness_change(at.port_no, false, now).ok().flatten()
        } else {
            None
        };
        self.emit(sim, at, None, Origin::Switch { dpid: at.dpid })?;
        if let Some(msg) = update {
            self.port_update(sim, at.dpid, msg)?;
        }
        if now + tx <= self.duration {
            sim.schedule(now + tx, Ev::BfdTick { at, generation })?;
        }
        Ok(())
    }

    fn on_host_frame(&mut self, sim: &mut Engine<Ev>, host: HostId, bytes: Vec<u8>) -> Result<(), SimError> {
        let actors = self.host_actors.get(&host).cloned().unwrap_or_default();
        for i in actors {
            if let AttackerSpec::RelayFabrication {
                h1,
                h2,
                relay_latency_us,
                ..
            } = &self.actors[i].spec
            {
                let to = if *h1 == host { h2.clone() } else { h1.clone() };
                let id = ChannelId::Relay { from: host.clone() };
                let model = crate::sim::ChannelModel::lossless(*relay_latency_us);
                let ch = self.channels.entry(id.clone()).or_insert_with(|| Channel::new(id, model));
                let meta = PacketMeta::new(PacketKind::Relay, Origin::Attacker { index: i }).payload(&bytes);
                sim.transmit(
                    ch,
                    meta,
                    Ev::RelayArrive {
                        attacker: i,
                        to,
                        bytes: bytes.clone(),
                    },
                )?;
            }
        }
        Ok(())
    }

    fn on_host_bfd(&mut self, sim: &mut Engine<Ev>, host: HostId) -> Result<(), SimError> {
        let answering = self
            .host_actors
            .get(&host)
            .and_then(|v| v.iter().copied().find(|&i| self.actors[i].spec.answers_bfd()));
        if let Some(i) = answering {
            self.host_send(sim, &host, i, None)?;
        }
        Ok(())
    }

    fn on_attack_step(&mut self, sim: &mut Engine<Ev>, i: usize, k: u64) -> Result<(), SimError> {
        let now = sim.now();
        match self.actors[i].spec.clone() {
            AttackerSpec::InjectFabrication {
                host,
                claimed_dpid,
                claimed_port,
                interval_s,
                forge_tag,
                count,
                start_s,
            } => {
                if count.is_some_and(|n| k >= n) {
                    return Ok(());
                }
                let profile = self.controllers[0].config().profile.clone();
                let claimed_mac = self
                    .truth
                    .switch(claimed_dpid)
                    .map_or(claimed_dpid.embedded_mac(), |s| s.local_port_mac);
                let f = forge_frame(&profile, slice_mac(0), claimed_dpid, claimed_mac, claimed_port, forge_tag, sim.rng());
                let bytes = f.encode().expect("forged frames are small");
                self.host_send(sim, &host, i, Some(bytes))?;
                let next = SimTime::from_secs_f64(start_s + (k + 1) as f64 * interval_s);
                if next <= self.duration && next > now {
                    sim.schedule(next, Ev::AttackStep { attacker: i, k: k + 1 })?;
                }
            }
            AttackerSpec::LldpFlood {
                host,
                rate_pps,
                duration_s,
                start_s,
            } => {
                let total = (rate_pps * duration_s).floor() as u64;
                if k >= total {
                    return Ok(());
                }
                let bytes = flood_frame(sim.rng()).encode().expect("flood frames are small");
                self.host_send(sim, &host, i, Some(bytes))?;
                let next = SimTime::from_secs_f64(start_s + (k + 1) as f64 / rate_pps);
                if k + 1 < total && next <= self.duration {
                    sim.schedule(next.max(now), Ev::AttackStep { attacker: i, k: k + 1 })?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn on_topology(&mut self, sim: &mut Engine<Ev>, index: usize, event: TopologyEvent) -> Result<(), SimError> {
        let next = self.truth.apply_event(&event).map_err(|e| SimError::HandlerAbort {
            at: sim.now(),
            reason: format!("topology event {index}: {e}"),
            trace_tail: Vec::new(),
        })?;
        self.truth = next;
        let mut cut = None;
        match &event.kind {
            TopologyEventKind::SwitchJoin(s) => {
                self.add_node(s.dpid);
                let f = self.features(s.dpid).expect("just added");
                for c in 0..self.controllers.len() {
                    let meta = PacketMeta::new(PacketKind::Hello, Origin::Switch { dpid: s.dpid })
                        .controller(c)
                        .dpid(s.dpid);
                    self.send(
                        sim,
                        ChannelId::ControlUp {
                            controller: c,
                            dpid: s.dpid,
                        },
                        meta,
                        Ev::Hello {
                            controller: c,
                            conn: s.dpid,
                            features: f.clone(),
                        },
                    )?;
                }
            }
            TopologyEventKind::SwitchLeave { dpid } => {
                self.switches.remove(dpid);
                for c in &mut self.controllers {
                    c.disconnect(*dpid);
                }
            }
            TopologyEventKind::LinkDown { a, b } => {
                cut = Some([DirectedLink { src: *a, dst: *b }, DirectedLink { src: *b, dst: *a }]);
            }
            _ => {}
        }
        let kind = serde_json::to_value(&event.kind)
            .ok()
            .and_then(|v| v.get("kind").and_then(|k| k.as_str().map(String::from)))
            .unwrap_or_default();
        self.convergence.push(EventConvergence {
            index,
            at: event.at,
            kind,
            converged_at: None,
            links_removed_at: None,
            cut,
        });
        Ok(())
    }

    fn reported_diff(&self, now: SimTime) -> Option<(TopologyDiff, BTreeSet<DirectedLink>)> {
        let c = self.controllers.first()?;
        let links = c.reported_links(now);
        Some((diff(&links, &self.truth), links))
    }

    /// Updates convergence trackers after anything that can change a view.
    fn observe(&mut self, now: SimTime) {
        if self
            .convergence
            .iter()
            .all(|e| e.converged_at.is_some() && (e.cut.is_none() || e.links_removed_at.is_some()))
        {
            return;
        }
        let Some((d, links)) = self.reported_diff(now) else { return };
        for e in &mut self.convergence {
            if e.converged_at.is_none() && d.is_exact() {
                e.converged_at = Some(now);
            }
            if let (Some([x, y]), None) = (e.cut, e.links_removed_at) {
                if !links.contains(&x) && !links.contains(&y) {
                    e.links_removed_at = Some(now);
                }
            }
        }
    }
}

impl Handler for World {
    type Event = Ev;

    fn handle(&mut self, sim: &mut Engine<Ev>, ev: Ev) -> Result<(), SimError> {
        let now = sim.now();
        match ev {
            Ev::Round { controller } => {
                let outs = self.controllers[controller].start_round(now);
                self.dispatch(sim, controller, outs)?;
                let period = self.controllers[controller].config().period;
                if now + period < self.duration {
                    sim.schedule(now + period, Ev::Round { controller })?;
                }
                self.observe(now);
            }
            Ev::ToSwitch { controller, conn, msg } => self.on_to_switch(sim, controller, conn, msg)?,
            Ev::ToController { controller, conn, msg } => {
                let (_, outs) = self.controllers[controller].receive(conn, msg, now);
                self.dispatch(sim, controller, outs)?;
                self.observe(now);
            }
            Ev::Hello {
                controller,
                conn,
                features,
            } => {
                if self.switches.contains_key(&conn) {
                    self.finish_connect(sim, controller, conn, features)?;
                }
                self.observe(now);
            }
            Ev::Frame { at, bytes } => self.on_frame(sim, at, bytes)?,
            Ev::BfdHello { at } => self.on_bfd_hello(sim, at)?,
            Ev::HostFrame { host, bytes } => self.on_host_frame(sim, host, bytes)?,
            Ev::HostBfd { host } => self.on_host_bfd(sim, host)?,
            Ev::RelayArrive { attacker, to, bytes } => self.host_send(sim, &to, attacker, Some(bytes))?,
            Ev::BfdTick { at, generation } => self.on_bfd_tick(sim, at, generation)?,
            Ev::Topology { index, event } => {
                self.on_topology(sim, index, event)?;
                self.observe(now);
            }
            Ev::AttackStep { attacker, k } => self.on_attack_step(sim, attacker, k)?,
            Ev::Sample => {
                if let Some((d, _)) = self.reported_diff(now) {
                    self.samples.push(DiffSample {
                        t_s: now.as_micros() / 1_000_000,
                        phantom: d.phantom_links.len(),
                        missing: d.missing_links.len(),
                    });
                }
                let next = now + SimTime::from_secs(1);
                if next <= self.duration {
                    sim.schedule(next, Ev::Sample)?;
                }
            }
        }
        Ok(())
    }
}
