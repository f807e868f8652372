//! Controller-side discovery: periodic per-port OFDP, periodic per-switch
//! OFDPv2, and event-driven authenticated sOFTD.

mod bfd;
mod controller;
mod ofdp;
mod softd;

pub use bfd::{BfdConfig, BfdSession, BfdState};
pub use controller::{
    ConnectOutcome, Controller, ControllerCounters, Outgoing, PacketInVerdict, RejectReason, SwitchFeatures,
    SwitchRecord,
};
pub use ofdp::{ofdp_age_links, ofdp_run_round, ofdpv2_run_round};
pub use softd::{softd_on_port_update, softd_provisioning};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lldp::{ControllerProfile, HmacKey};
use crate::sim::SimTime;
use crate::topology::{DirectedLink, Dpid, PortId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscoveryMode {
    Ofdp,
    Ofdpv2,
    Softd,
}

impl DiscoveryMode {
    pub fn is_periodic(self) -> bool {
        matches!(self, DiscoveryMode::Ofdp | DiscoveryMode::Ofdpv2)
    }
}

/// Hard timeout of the sOFTD to-controller forward rules.
pub const FORWARD_WINDOW: SimTime = SimTime::from_secs(1);

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryConfig {
    pub mode: DiscoveryMode,
    /// Round period `T` for the periodic modes.
    pub period: SimTime,
    pub staleness_rounds: u32,
    pub hmac_key: Option<HmacKey>,
    pub profile: ControllerProfile,
    pub bfd: BfdConfig,
    /// Switch identity comes from the authenticated control channel rather
    /// than from whatever the switch claims.
    pub channel_binding: bool,
}

impl DiscoveryConfig {
    pub fn new(mode: DiscoveryMode) -> Self {
        let profile = ControllerProfile::pox_like();
        DiscoveryConfig {
            mode,
            period: SimTime::from_secs_f64(profile.default_period_s),
            staleness_rounds: 3,
            hmac_key: None,
            profile,
            bfd: BfdConfig::default(),
            channel_binding: false,
        }
    }

    pub fn with_key(mut self, key: HmacKey) -> Self {
        self.hmac_key = Some(key);
        self
    }

    pub fn staleness_bound(&self) -> SimTime {
        SimTime(self.period.as_micros() * self.staleness_rounds as u64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.period == SimTime::ZERO {
            return Err(ConfigError::NonPositivePeriod);
        }
        if self.staleness_rounds < 1 {
            return Err(ConfigError::ZeroStaleness);
        }
        if self.mode == DiscoveryMode::Softd && self.hmac_key.is_none() {
            return Err(ConfigError::SoftdRequiresKey);
        }
        if self.mode == DiscoveryMode::Ofdpv2 && self.hmac_key.is_some() {
            return Err(ConfigError::RewriteBreaksHmac);
        }
        if self.bfd.tx_interval == SimTime::ZERO || self.bfd.detect_mult < 1 {
            return Err(ConfigError::BadBfd);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("discovery period T must be positive")]
    NonPositivePeriod,
    #[error("staleness_rounds must be at least 1")]
    ZeroStaleness,
    #[error("softd requires hmac key")]
    SoftdRequiresKey,
    #[error("ofdpv2 rewrites port TLVs in the switch, which invalidates HMAC tags")]
    RewriteBreaksHmac,
    #[error("BFD needs a positive tx interval and detect multiplier")]
    BadBfd,
}

/// Per-round message accounting for the periodic modes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub round_index: u64,
    pub started_at: SimTime,
    pub packet_outs: u64,
    pub packet_ins: u64,
    pub links_confirmed: u64,
    pub rejected_frames: u64,
}

/// What a controller believes the topology is.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopologyView {
    links: BTreeMap<DirectedLink, SimTime>,
    switches: BTreeSet<Dpid>,
}

impl TopologyView {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or refreshes; returns true if the link is new.
    pub fn confirm(&mut self, link: DirectedLink, at: SimTime) -> bool {
        self.links.insert(link, at).is_none()
    }

    pub fn last_confirmed(&self, link: &DirectedLink) -> Option<SimTime> {
        self.links.get(link).copied()
    }

    pub fn remove_port(&mut self, port: PortId) -> Vec<DirectedLink> {
        let gone: Vec<DirectedLink> = self.links.keys().filter(|l| l.touches(port)).copied().collect();
        for l in &gone {
            self.links.remove(l);
        }
        gone
    }

    /// Drops links whose last confirmation is at least `bound` old.
    pub fn age(&mut self, now: SimTime, bound: SimTime) -> Vec<DirectedLink> {
        let gone: Vec<DirectedLink> = self
            .links
            .iter()
            .filter(|(_, &t)| now.saturating_sub(t) >= bound)
            .map(|(l, _)| *l)
            .collect();
        for l in &gone {
            self.links.remove(l);
        }
        gone
    }

    pub fn links(&self) -> impl Iterator<Item = &DirectedLink> {
        self.links.keys()
    }

    pub fn link_set(&self) -> BTreeSet<DirectedLink> {
        self.links.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn switches(&self) -> &BTreeSet<Dpid> {
        &self.switches
    }

    pub fn add_switch(&mut self, d: Dpid) {
        self.switches.insert(d);
    }

    pub fn remove_switch(&mut self, d: Dpid) {
        self.switches.remove(&d);
    }
}
