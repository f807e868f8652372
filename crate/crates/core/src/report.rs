//! Run orchestration, metrics aggregation and report comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::{evaluate, AttackOutcome, Evidence};
use crate::discovery::{ControllerCounters, RoundStats};
use crate::scenario::Scenario;
use crate::sim::{ChannelId, Engine, PacketKind, SimError, TraceEntry};
use crate::topology::{diff, DirectedLink, Dpid, GroundTruthTopology, Link, TopologyDiff};
use crate::world::{DiffSample, EventConvergence, World};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KindTotals {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// Control-channel discovery traffic, provisioning excluded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryTotals {
    pub packet_outs: u64,
    pub packet_ins: u64,
    pub port_updates: u64,
    pub flow_mods: u64,
    pub total: u64,
    pub controller_bound: u64,
    pub from_controller: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySummary {
    pub switches: usize,
    pub links: usize,
    pub total_ports: usize,
    pub ports: BTreeMap<Dpid, Vec<u16>>,
    pub link_list: Vec<Link>,
}

impl TopologySummary {
    pub fn of(t: &GroundTruthTopology) -> Self {
        TopologySummary {
            switches: t.switch_count(),
            links: t.link_count(),
            total_ports: t.total_ports(),
            ports: t.switches().map(|s| (s.dpid, s.ports.keys().copied().collect())).collect(),
            link_list: t.links().iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerReport {
    pub index: usize,
    pub rounds: Vec<RoundStats>,
    pub counters: ControllerCounters,
    pub final_links: Vec<DirectedLink>,
    pub final_diff: TopologyDiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub mode: String,
    pub duration_s: f64,
    pub topology: TopologySummary,
    /// The scenario as run, with any key redacted.
    pub config: serde_json::Value,
    pub controllers: Vec<ControllerReport>,
    pub totals: BTreeMap<String, KindTotals>,
    pub discovery: DiscoveryTotals,
    pub provisioning_messages: u64,
    pub convergence: Vec<EventConvergence>,
    pub diff_series: Vec<DiffSample>,
    pub attacks: Vec<AttackOutcome>,
    pub trace_entries: u64,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn rounds(&self) -> usize {
        self.controllers.iter().map(|c| c.rounds.len()).sum()
    }
}

pub struct RunOutput {
    pub report: RunReport,
    pub trace: Vec<TraceEntry>,
}

fn kind_name(k: PacketKind) -> String {
    serde_json::to_value(k)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

fn totals_of(trace: &[TraceEntry]) -> BTreeMap<String, KindTotals> {
    let mut m: BTreeMap<String, KindTotals> = BTreeMap::new();
    for e in trace {
        let t = m.entry(kind_name(e.meta.kind)).or_default();
        t.sent += 1;
        if e.delivered() {
            t.delivered += 1;
        } else {
            t.dropped += 1;
        }
    }
    m
}

/// Discovery counts over sends on the control channels.
pub fn discovery_of(trace: &[TraceEntry]) -> DiscoveryTotals {
    let mut d = DiscoveryTotals::default();
    for e in trace.iter().filter(|e| e.meta.discovery) {
        match e.channel {
            ChannelId::ControlUp { .. } => d.controller_bound += 1,
            ChannelId::ControlDown { .. } => d.from_controller += 1,
            _ => continue,
        }
        match e.meta.kind {
            PacketKind::PacketOut => d.packet_outs += 1,
            PacketKind::PacketIn => d.packet_ins += 1,
            PacketKind::PortUpdate => d.port_updates += 1,
            PacketKind::FlowMod => d.flow_mods += 1,
            _ => {}
        }
        d.total += 1;
    }
    d
}

fn provisioning_of(trace: &[TraceEntry]) -> u64 {
    trace
        .iter()
        .filter(|e| !e.meta.discovery && matches!(e.channel, ChannelId::ControlDown { .. }))
        .count() as u64
}

fn config_echo(scn: &Scenario) -> serde_json::Value {
    let mut v = serde_json::to_value(&scn.spec).expect("specs always serialize");
    if let Some(k) = v.pointer_mut("/discovery/hmac_key") {
        *k = serde_json::Value::String("redacted".into());
    }
    v
}

/// Runs a validated scenario to its duration.
pub fn run(scn: &Scenario) -> Result<RunOutput, SimError> {
    let mut sim: Engine<crate::world::Ev> = Engine::new(scn.spec.seed);
    let mut world = World::new(scn);
    world.bootstrap(&mut sim, scn)?;
    sim.run_until(&mut world, scn.spec.duration())?;
    let end = sim.now();
    let trace = sim.into_trace();
    let state = world.finish();
    let controllers: Vec<ControllerReport> = state
        .controllers
        .iter()
        .map(|c| {
            let links = c.reported_links(end);
            ControllerReport {
                index: c.index,
                rounds: c.rounds().to_vec(),
                counters: c.counters().clone(),
                final_diff: diff(&links, &state.truth),
                final_links: links.into_iter().collect(),
            }
        })
        .collect();
    let empty = TopologyDiff::default();
    let final_diff = controllers.first().map_or(&empty, |c| &c.final_diff);
    let evidence = Evidence {
        trace: &trace,
        diff: final_diff,
        truth: &state.truth,
        hmac_enabled: scn.config.hmac_key.is_some(),
    };
    let attacks = scn
        .spec
        .attackers
        .iter()
        .enumerate()
        .map(|(i, a)| evaluate(i, a, &evidence))
        .collect();
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        scenario: scn.spec.name.clone(),
        seed: scn.spec.seed,
        mode: kind_name_mode(scn),
        duration_s: scn.spec.duration_s,
        topology: TopologySummary::of(&scn.truth),
        config: config_echo(scn),
        controllers,
        totals: totals_of(&trace),
        discovery: discovery_of(&trace),
        provisioning_messages: provisioning_of(&trace),
        convergence: state.convergence,
        diff_series: state.samples,
        attacks,
        trace_entries: trace.len() as u64,
    };
    Ok(RunOutput { report, trace })
}

fn kind_name_mode(scn: &Scenario) -> String {
    serde_json::to_value(scn.config.mode)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Checks that the report's aggregates reconcile with the raw trace.
pub fn audit(report: &RunReport, trace: &[TraceEntry]) -> Result<(), Vec<String>> {
    let mut errs = Vec::new();
    if report.trace_entries != trace.len() as u64 {
        errs.push(format!("trace_entries {} but trace has {}", report.trace_entries, trace.len()));
    }
    for (i, e) in trace.iter().enumerate() {
        if e.seq != i as u64 {
            errs.push(format!("trace entry {i} has seq {}", e.seq));
            break;
        }
        if e.arrival().is_some_and(|a| a < e.sent_at) {
            errs.push(format!("trace entry {i} arrives before it was sent"));
        }
    }
    let totals = totals_of(trace);
    if totals != report.totals {
        errs.push("per-kind totals differ from the trace".into());
    }
    for (k, t) in &report.totals {
        if t.sent != t.delivered + t.dropped {
            errs.push(format!("{k}: sent {} != delivered {} + dropped {}", t.sent, t.delivered, t.dropped));
        }
    }
    let d = discovery_of(trace);
    if d != report.discovery {
        errs.push(format!("discovery totals {:?} differ from the trace {:?}", report.discovery, d));
    }
    if d.total != d.controller_bound + d.from_controller {
        errs.push("discovery total is not the sum of both directions".into());
    }
    let round_outs: u64 = report
        .controllers
        .iter()
        .flat_map(|c| &c.rounds)
        .map(|r| r.packet_outs)
        .sum();
    if report.rounds() > 0 && round_outs != d.packet_outs {
        errs.push(format!("round packet-outs {round_outs} but trace has {}", d.packet_outs));
    }
    if provisioning_of(trace) != report.provisioning_messages {
        errs.push("provisioning count differs from the trace".into());
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("compare needs at least two reports, got {0}")]
    TooFew(usize),
    #[error("report {index} ({name:?}) was run on a different topology than report 0")]
    TopologyMismatch { index: usize, name: String },
    #[error("unsupported report schema_version {0}")]
    Schema(u32),
}

#[derive(Debug, Serialize)]
struct Row {
    scenario: String,
    mode: String,
    controllers: usize,
    seed: u64,
    duration_s: f64,
    rounds: usize,
    packet_outs: u64,
    packet_ins: u64,
    packet_outs_per_round: Option<f64>,
    packet_ins_per_round: Option<f64>,
    port_updates: u64,
    flow_mods: u64,
    discovery_total: u64,
    controller_bound: u64,
    mean_convergence_s: Option<f64>,
    max_convergence_s: Option<f64>,
    attacks: String,
    delta_packet_outs: i64,
    delta_packet_ins: i64,
    delta_discovery_total: i64,
    delta_controller_bound: i64,
    delta_mean_convergence_s: Option<f64>,
}

fn convergence_stats(r: &RunReport) -> (Option<f64>, Option<f64>) {
    let lat: Vec<f64> = r
        .convergence
        .iter()
        .filter_map(|e| Some((e.converged_at? - e.at).as_secs_f64()))
        .collect();
    if lat.is_empty() {
        return (None, None);
    }
    let mean = lat.iter().sum::<f64>() / lat.len() as f64;
    (Some(mean), lat.iter().copied().reduce(f64::max))
}

fn per_round(n: u64, rounds: usize) -> Option<f64> {
    (rounds > 0).then(|| n as f64 / rounds as f64)
}

/// Side-by-side CSV; deltas are relative to the first report.
pub fn compare(reports: &[RunReport]) -> Result<String, CompareError> {
    if reports.len() < 2 {
        return Err(CompareError::TooFew(reports.len()));
    }
    for r in reports {
        if r.schema_version != SCHEMA_VERSION {
            return Err(CompareError::Schema(r.schema_version));
        }
    }
    let base = &reports[0];
    for (index, r) in reports.iter().enumerate().skip(1) {
        if r.topology != base.topology {
            return Err(CompareError::TopologyMismatch {
                index,
                name: r.scenario.clone(),
            });
        }
    }
    let (base_mean, _) = convergence_stats(base);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        let (mean, max) = convergence_stats(r);
        let d = &r.discovery;
        let attacks = r
            .attacks
            .iter()
            .map(|a| format!("{}={}", a.kind, if a.succeeded { "success" } else { "fail" }))
            .collect::<Vec<_>>()
            .join(";");
        let row = Row {
            scenario: r.scenario.clone(),
            mode: r.mode.clone(),
            controllers: r.controllers.len(),
            seed: r.seed,
            duration_s: r.duration_s,
            rounds: r.rounds(),
            packet_outs: d.packet_outs,
            packet_ins: d.packet_ins,
            packet_outs_per_round: per_round(d.packet_outs, r.rounds()),
            packet_ins_per_round: per_round(d.packet_ins, r.rounds()),
            port_updates: d.port_updates,
            flow_mods: d.flow_mods,
            discovery_total: d.total,
            controller_bound: d.controller_bound,
            mean_convergence_s: mean,
            max_convergence_s: max,
            attacks,
            delta_packet_outs: d.packet_outs as i64 - base.discovery.packet_outs as i64,
            delta_packet_ins: d.packet_ins as i64 - base.discovery.packet_ins as i64,
            delta_discovery_total: d.total as i64 - base.discovery.total as i64,
            delta_controller_bound: d.controller_bound as i64 - base.discovery.controller_bound as i64,
            delta_mean_convergence_s: mean.zip(base_mean).map(|(a, b)| a - b),
        };
        w.serialize(row).expect("in-memory csv");
    }
    Ok(String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8"))
}
