//! Deterministic discrete-event core.
//!
//! One virtual clock, one event queue ordered by `(time, insertion sequence)`,
//! one seeded RNG, and lossy channels whose every send is recorded in the
//! trace exactly once (delivered or dropped).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::{self, Write};
use std::ops::{Add, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Dpid, HostId, PortId};

/// Microseconds since the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond; negative input clamps to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1e6).round().max(0.0) as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_add(rhs.0))
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("cannot schedule at {at} while the clock is at {now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("deadline {deadline} precedes current time {now}")]
    DeadlineInPast { deadline: SimTime, now: SimTime },
    #[error("handler aborted at {at}: {reason}")]
    HandlerAbort {
        at: SimTime,
        reason: String,
        trace_tail: Vec<String>,
    },
}

struct Pending<E> {
    at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Pending<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Pending<E> {}

impl<E> PartialOrd for Pending<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Pending<E> {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.at, other.seq).cmp(&(self.at, self.seq))
    }
}

/// Pending events, popped in `(time, sequence)` order.
pub struct EventQueue<E> {
    heap: BinaryHeap<Pending<E>>,
    next_seq: u64,
    now: SimTime,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            next_seq: 0,
            now: SimTime::ZERO,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Enqueues `payload` at `at` and returns its sequence number.
    pub fn schedule(&mut self, at: SimTime, payload: E) -> Result<u64, SimError> {
        if at < self.now {
            return Err(SimError::ScheduleInPast { at, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Pending { at, seq, payload });
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|p| p.at)
    }

    /// Pops the next event and advances the clock to its time.
    pub fn pop(&mut self) -> Option<(SimTime, u64, E)> {
        let p = self.heap.pop()?;
        self.now = p.at;
        Some((p.at, p.seq, p.payload))
    }

    fn advance_to(&mut self, t: SimTime) {
        debug_assert!(t >= self.now);
        self.now = t;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossModel {
    None,
    Bernoulli { q: f64 },
    /// Sliding window: a send is accepted while fewer than `capacity` sends
    /// were accepted within the last `window_us`.
    LoadThreshold { capacity: u32, window_us: u64 },
}

impl LossModel {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            LossModel::None => Ok(()),
            LossModel::Bernoulli { q } if (0.0..=1.0).contains(&q) => Ok(()),
            LossModel::Bernoulli { q } => Err(format!("loss probability {q} outside [0, 1]")),
            LossModel::LoadThreshold { capacity, window_us } => {
                if capacity < 1 {
                    Err("load-threshold capacity must be at least 1".into())
                } else if window_us == 0 {
                    Err("load-threshold window must be positive".into())
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub latency_us: u64,
    #[serde(default = "no_loss")]
    pub loss: LossModel,
}

fn no_loss() -> LossModel {
    LossModel::None
}

impl ChannelModel {
    pub const fn lossless(latency_us: u64) -> Self {
        ChannelModel {
            latency_us,
            loss: LossModel::None,
        }
    }

    pub fn latency(&self) -> SimTime {
        SimTime::from_micros(self.latency_us)
    }
}

/// Endpoint identity of a channel, as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ChannelId {
    /// Controller to switch.
    ControlDown { controller: usize, dpid: Dpid },
    /// Switch to controller.
    ControlUp { controller: usize, dpid: Dpid },
    /// Switch-to-switch data link, keyed by the egress port.
    Link { from: PortId },
    HostUp { host: HostId },
    HostDown { host: HostId },
    /// Attacker out-of-band relay, invisible to the controller.
    Relay { from: HostId },
    /// Egress port with nothing attached.
    Unattached { from: PortId },
}

impl ChannelId {
    pub fn is_control(&self) -> bool {
        matches!(self, ChannelId::ControlDown { .. } | ChannelId::ControlUp { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Delivered { arrival: SimTime },
    Dropped(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    Loss,
    Overload,
    NoPeer,
}

/// A directed, possibly lossy channel with fixed latency.
#[derive(Debug, Clone)]
pub struct Channel {
    pub id: ChannelId,
    model: ChannelModel,
    accepted: VecDeque<SimTime>,
}

impl Channel {
    pub fn new(id: ChannelId, model: ChannelModel) -> Self {
        Channel {
            id,
            model,
            accepted: VecDeque::new(),
        }
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Delivery or drop for one send at `now`. Draws from `rng` only for
    /// the Bernoulli model.
    pub fn decide(&mut self, now: SimTime, rng: &mut impl Rng) -> Decision {
        let deliver = Decision::Delivered {
            arrival: now + self.model.latency(),
        };
        match self.model.loss {
            LossModel::None => deliver,
            LossModel::Bernoulli { q } => {
                if rng.random::<f64>() < q {
                    Decision::Dropped(DropReason::Loss)
                } else {
                    deliver
                }
            }
            LossModel::LoadThreshold {
                capacity,
                window_us,
            } => {
                while let Some(&t) = self.accepted.front() {
                    if now.as_micros() - t.as_micros() >= window_us {
                        self.accepted.pop_front();
                    } else {
                        break;
                    }
                }
                if self.accepted.len() < capacity as usize {
                    self.accepted.push_back(now);
                    deliver
                } else {
                    Decision::Dropped(DropReason::Overload)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PacketKind {
    PacketOut,
    PacketIn,
    FlowMod,
    GroupMod,
    PortUpdate,
    /// Switch features handshake.
    Hello,
    /// LLDP frame on a data-plane link or host link.
    Lldp,
    Bfd,
    Relay,
}

/// Who originally produced the bytes a packet carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "by", rename_all = "kebab-case")]
pub enum Origin {
    Controller { index: usize },
    Switch { dpid: Dpid },
    Attacker { index: usize },
    Host,
}

/// Descriptive fields attached to one send.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketMeta {
    pub kind: PacketKind,
    pub origin: Origin,
    /// Counts toward discovery cost (as opposed to one-off provisioning).
    pub discovery: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dpid: Option<Dpid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_timeout_us: Option<u64>,
    #[serde(default, with = "hex_opt", skip_serializing_if = "Option::is_none")]
    pub payload: Option<Vec<u8>>,
}

impl PacketMeta {
    pub fn new(kind: PacketKind, origin: Origin) -> Self {
        PacketMeta {
            kind,
            origin,
            discovery: false,
            controller: None,
            dpid: None,
            port: None,
            hard_timeout_us: None,
            payload: None,
        }
    }

    pub fn discovery(mut self, yes: bool) -> Self {
        self.discovery = yes;
        self
    }

    pub fn controller(mut self, c: usize) -> Self {
        self.controller = Some(c);
        self
    }

    pub fn dpid(mut self, d: Dpid) -> Self {
        self.dpid = Some(d);
        self
    }

    pub fn port(mut self, p: u16) -> Self {
        self.port = Some(p);
        self
    }

    pub fn hard_timeout(mut self, t: Option<SimTime>) -> Self {
        self.hard_timeout_us = t.map(SimTime::as_micros);
        self
    }

    pub fn payload(mut self, b: &[u8]) -> Self {
        self.payload = Some(b.to_vec());
        self
    }
}

mod hex_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(b) => s.serialize_str(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| hex::decode(s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TraceOutcome {
    Delivered { arrival: SimTime },
    Dropped { reason: DropReason },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub seq: u64,
    pub sent_at: SimTime,
    pub channel: ChannelId,
    #[serde(flatten)]
    pub meta: PacketMeta,
    pub outcome: TraceOutcome,
}

impl TraceEntry {
    pub fn delivered(&self) -> bool {
        matches!(self.outcome, TraceOutcome::Delivered { .. })
    }

    pub fn arrival(&self) -> Option<SimTime> {
        match self.outcome {
            TraceOutcome::Delivered { arrival } => Some(arrival),
            TraceOutcome::Dropped { .. } => None,
        }
    }
}

/// Writes one JSON object per line.
pub fn write_trace_jsonl<W: Write>(trace: &[TraceEntry], mut w: W) -> io::Result<()> {
    for e in trace {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Implemented by whatever owns the simulated state.
pub trait Handler {
    type Event;

    fn handle(&mut self, sim: &mut Engine<Self::Event>, event: Self::Event) -> Result<(), SimError>;
}

/// Clock, queue, RNG and trace for one run.
pub struct Engine<E> {
    queue: EventQueue<E>,
    rng: ChaCha8Rng,
    trace: Vec<TraceEntry>,
}

impl<E> Engine<E> {
    pub fn new(seed: u64) -> Self {
        Engine {
            queue: EventQueue::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Vec::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<u64, SimError> {
        self.queue.schedule(at, event)
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> Result<u64, SimError> {
        let at = self.now() + delay;
        self.queue.schedule(at, event)
    }

    pub fn trace(&self) -> &[TraceEntry] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<TraceEntry> {
        self.trace
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Sends through `ch`: records the outcome and, if delivered, schedules
    /// `event` at the arrival time.
    pub fn transmit(&mut self, ch: &mut Channel, meta: PacketMeta, event: E) -> Result<Decision, SimError> {
        let now = self.now();
        let decision = ch.decide(now, &mut self.rng);
        let outcome = match decision {
            Decision::Delivered { arrival } => {
                self.queue.schedule(arrival, event)?;
                TraceOutcome::Delivered { arrival }
            }
            Decision::Dropped(reason) => TraceOutcome::Dropped { reason },
        };
        self.push_trace(ch.id.clone(), meta, outcome);
        Ok(decision)
    }

    /// Records a send that had nowhere to go.
    pub fn record_drop(&mut self, channel: ChannelId, meta: PacketMeta, reason: DropReason) {
        self.push_trace(channel, meta, TraceOutcome::Dropped { reason });
    }

    fn push_trace(&mut self, channel: ChannelId, meta: PacketMeta, outcome: TraceOutcome) {
        let seq = self.trace.len() as u64;
        self.trace.push(TraceEntry {
            seq,
            sent_at: self.now(),
            channel,
            meta,
            outcome,
        });
    }

    fn tail(&self, n: usize) -> Vec<String> {
        self.trace
            .iter()
            .rev()
            .take(n)
            .rev()
            .map(|e| serde_json::to_string(e).unwrap_or_default())
            .collect()
    }

    /// Processes every event with time ≤ `deadline`, then parks the clock there.
    pub fn run_until<H>(&mut self, world: &mut H, deadline: SimTime) -> Result<(), SimError>
    where
        H: Handler<Event = E>,
    {
        if deadline < self.now() {
            return Err(SimError::DeadlineInPast {
                deadline,
                now: self.now(),
            });
        }
        while let Some(t) = self.queue.peek_time() {
            if t > deadline {
                break;
            }
            let (at, _, ev) = self.queue.pop().expect("peeked");
            if let Err(e) = world.handle(self, ev) {
                let reason = match e {
                    SimError::HandlerAbort { reason, .. } => reason,
                    other => other.to_string(),
                };
                return Err(SimError::HandlerAbort {
                    at,
                    reason,
                    trace_tail: self.tail(10),
                });
            }
        }
        self.queue.advance_to(deadline);
        Ok(())
    }
}
