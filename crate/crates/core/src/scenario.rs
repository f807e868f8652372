//! Declarative experiment input.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attacks::AttackerSpec;
use crate::discovery::{BfdConfig, DiscoveryConfig, DiscoveryMode};
use crate::lldp::{builtin_profiles, ControllerProfile, HmacKey};
use crate::sim::{ChannelId, ChannelModel, SimTime};
use crate::topology::{GroundTruthTopology, TopologyEvent, TopologySpec};

/// Highest controller count; each controller needs its own probe source MAC.
pub const MAX_CONTROLLERS: usize = 255;

fn one() -> usize {
    1
}

fn default_duration() -> f64 {
    60.0
}

fn three() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub discovery: DiscoverySpec,
    #[serde(default)]
    pub channels: ChannelsSpec,
    #[serde(default)]
    pub events: Vec<TopologyEvent>,
    #[serde(default)]
    pub attackers: Vec<AttackerSpec>,
    #[serde(default = "one")]
    pub controllers: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
}

/// A profile given by builtin name or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Name(String),
    Inline(ControllerProfile),
}

impl Default for ProfileRef {
    fn default() -> Self {
        ProfileRef::Name("pox-like".into())
    }
}

impl ProfileRef {
    pub fn resolve(&self) -> Option<ControllerProfile> {
        match self {
            ProfileRef::Name(n) => builtin_profiles().into_iter().find(|p| &p.name == n),
            ProfileRef::Inline(p) => Some(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BfdSpec {
    #[serde(default = "default_tx_ms")]
    pub tx_interval_ms: f64,
    #[serde(default = "three")]
    pub detect_mult: u32,
}

fn default_tx_ms() -> f64 {
    100.0
}

impl Default for BfdSpec {
    fn default() -> Self {
        BfdSpec {
            tx_interval_ms: default_tx_ms(),
            detect_mult: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoverySpec {
    #[serde(default = "default_mode")]
    pub mode: DiscoveryMode,
    /// Round period in seconds; defaults to the profile's own period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_s: Option<f64>,
    #[serde(default = "three")]
    pub staleness_rounds: u32,
    /// Hex-encoded key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hmac_key: Option<String>,
    #[serde(default)]
    pub nonce_mode: bool,
    #[serde(default)]
    pub profile: ProfileRef,
    #[serde(default)]
    pub bfd: BfdSpec,
    #[serde(default)]
    pub channel_binding: bool,
}

fn default_mode() -> DiscoveryMode {
    DiscoveryMode::Ofdp
}

impl Default for DiscoverySpec {
    fn default() -> Self {
        DiscoverySpec {
            mode: DiscoveryMode::Ofdp,
            period_s: None,
            staleness_rounds: 3,
            hmac_key: None,
            nonce_mode: false,
            profile: ProfileRef::default(),
            bfd: BfdSpec::default(),
            channel_binding: false,
        }
    }
}

impl DiscoverySpec {
    pub fn for_mode(mode: DiscoveryMode) -> Self {
        DiscoverySpec {
            mode,
            ..Self::default()
        }
    }

    pub fn with_key_hex(mut self, hex: &str) -> Self {
        self.hmac_key = Some(hex.into());
        self
    }

    /// Builds the engine config, reporting every problem found.
    pub fn to_config(&self) -> Result<DiscoveryConfig, Vec<String>> {
        let mut errs = Vec::new();
        let profile = match self.profile.resolve() {
            Some(p) => p,
            None => {
                errs.push(format!("discovery.profile: unknown profile {:?}", self.profile));
                ControllerProfile::pox_like()
            }
        };
        let period_s = self.period_s.unwrap_or(profile.default_period_s);
        if !(period_s > 0.0) || !period_s.is_finite() {
            errs.push(format!("discovery.period_s: T must be positive, got {period_s}"));
        }
        if !(self.bfd.tx_interval_ms > 0.0) || !self.bfd.tx_interval_ms.is_finite() {
            errs.push("discovery.bfd.tx_interval_ms must be positive".into());
        }
        let key = match &self.hmac_key {
            None => None,
            Some(h) => match HmacKey::from_hex(h) {
                Ok(k) => Some(k.with_nonce_mode(self.nonce_mode)),
                Err(e) => {
                    errs.push(format!("discovery.hmac_key: {e}"));
                    None
                }
            },
        };
        let cfg = DiscoveryConfig {
            mode: self.mode,
            period: SimTime::from_secs_f64(period_s.max(0.0)),
            staleness_rounds: self.staleness_rounds,
            hmac_key: key,
            profile,
            bfd: BfdConfig {
                tx_interval: SimTime::from_secs_f64(self.bfd.tx_interval_ms.max(0.0) / 1000.0),
                detect_mult: self.bfd.detect_mult,
            },
            channel_binding: self.channel_binding,
        };
        // later checks would only repeat problems already listed
        if errs.is_empty() {
            if let Err(e) = cfg.validate() {
                errs.push(format!("discovery: {e}"));
            }
        }
        if errs.is_empty() {
            Ok(cfg)
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelOverride {
    pub channel: ChannelId,
    pub model: ChannelModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelsSpec {
    /// Controller-switch channels, both directions.
    #[serde(default = "default_control")]
    pub control: ChannelModel,
    /// Switch-to-switch links.
    #[serde(default = "default_data")]
    pub data: ChannelModel,
    /// Host links, both directions.
    #[serde(default = "default_data")]
    pub host: ChannelModel,
    #[serde(default)]
    pub overrides: Vec<ChannelOverride>,
}

fn default_control() -> ChannelModel {
    ChannelModel::lossless(1_000)
}

fn default_data() -> ChannelModel {
    ChannelModel::lossless(500)
}

impl Default for ChannelsSpec {
    fn default() -> Self {
        ChannelsSpec {
            control: default_control(),
            data: default_data(),
            host: default_data(),
            overrides: Vec::new(),
        }
    }
}

impl ChannelsSpec {
    pub fn model_for(&self, id: &ChannelId) -> ChannelModel {
        if let Some(o) = self.overrides.iter().find(|o| &o.channel == id) {
            return o.model;
        }
        match id {
            ChannelId::ControlDown { .. } | ChannelId::ControlUp { .. } => self.control,
            ChannelId::HostUp { .. } | ChannelId::HostDown { .. } => self.host,
            _ => self.data,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario does not parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{}", ValidationList(.0))]
    Invalid(Vec<String>),
}

struct ValidationList<'a>(&'a [String]);

impl fmt::Display for ValidationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scenario is invalid ({} problems)", self.0.len())?;
        for e in self.0 {
            write!(f, "\n  - {e}")?;
        }
        Ok(())
    }
}

/// A validated scenario with its derived pieces.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub truth: GroundTruthTopology,
    pub config: DiscoveryConfig,
}

impl ScenarioSpec {
    /// A scenario with every optional field at its default.
    pub fn new(topology: TopologySpec) -> Self {
        ScenarioSpec {
            name: String::new(),
            topology,
            discovery: DiscoverySpec::default(),
            channels: ChannelsSpec::default(),
            events: Vec::new(),
            attackers: Vec::new(),
            controllers: 1,
            duration_s: default_duration(),
            seed: 0,
        }
    }

    pub fn duration(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s)
    }

    /// Checks every module precondition; collects all problems.
    pub fn validate(&self) -> Result<Scenario, ScenarioError> {
        let mut errs = Vec::new();
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            errs.push(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if self.controllers == 0 || self.controllers > MAX_CONTROLLERS {
            errs.push(format!("controllers must be in 1..={MAX_CONTROLLERS}, got {}", self.controllers));
        }
        let truth = match GroundTruthTopology::build(&self.topology) {
            Ok(t) => Some(t),
            Err(e) => {
                errs.push(format!("topology: {e}"));
                None
            }
        };
        let config = self.discovery.to_config().map_err(|e| errs.extend(e)).ok();
        let c = &self.channels;
        for (name, m) in [("control", &c.control), ("data", &c.data), ("host", &c.host)]
            .into_iter()
            .chain(c.overrides.iter().map(|o| ("overrides", &o.model)))
        {
            if let Err(e) = m.loss.validate() {
                errs.push(format!("channels.{name}: {e}"));
            }
        }
        if let Some(truth) = &truth {
            let mut t = truth.clone();
            let mut last = SimTime::ZERO;
            for (i, e) in self.events.iter().enumerate() {
                if e.at < last {
                    errs.push(format!("events[{i}]: time {} is earlier than the previous event", e.at.as_micros()));
                }
                last = last.max(e.at);
                match t.apply_event(e) {
                    Ok(next) => t = next,
                    Err(err) => errs.push(format!("events[{i}]: {err}")),
                }
            }
            for (i, a) in self.attackers.iter().enumerate() {
                errs.extend(a.validate(truth).into_iter().map(|m| format!("attackers[{i}]: {m}")));
            }
        }
        match (truth, config) {
            (Some(truth), Some(config)) if errs.is_empty() => Ok(Scenario {
                spec: self.clone(),
                truth,
                config,
            }),
            _ => Err(ScenarioError::Invalid(errs)),
        }
    }
}

pub fn parse_scenario(json: &str) -> Result<Scenario, ScenarioError> {
    let spec: ScenarioSpec = serde_json::from_str(json)?;
    spec.validate()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Topologies used throughout the examples and tests.
pub mod presets {
    use crate::topology::{HostSpec, LinkSpec, SwitchSpec, TopologySpec};

    /// Two switches, one port each, one link.
    pub fn two_switch() -> TopologySpec {
        TopologySpec {
            switches: vec![SwitchSpec::with_ports(1, 1), SwitchSpec::with_ports(2, 1)],
            hosts: vec![],
            links: vec![LinkSpec::new((1, 1), (2, 1))],
        }
    }

    /// s1 – s2 – s3 with ports 1, 2, 1.
    pub fn line3() -> TopologySpec {
        TopologySpec {
            switches: vec![
                SwitchSpec::with_ports(1, 1),
                SwitchSpec::with_ports(2, 2),
                SwitchSpec::with_ports(3, 1),
            ],
            hosts: vec![],
            links: vec![LinkSpec::new((1, 1), (2, 1)), LinkSpec::new((2, 2), (3, 1))],
        }
    }

    /// Four switches in a ring: s1:1–s2:1, s2:2–s3:1, s3:2–s4:1, s4:2–s1:2.
    pub fn ring4() -> TopologySpec {
        TopologySpec {
            switches: (1..=4).map(|d| SwitchSpec::with_ports(d, 2)).collect(),
            hosts: vec![],
            links: vec![
                LinkSpec::new((1, 1), (2, 1)),
                LinkSpec::new((2, 2), (3, 1)),
                LinkSpec::new((3, 2), (4, 1)),
                LinkSpec::new((4, 2), (1, 2)),
            ],
        }
    }

    /// s1 – s2 – s3 with h1 on s1/2 and h2 on s3/2.
    pub fn line3_hosts() -> TopologySpec {
        TopologySpec {
            switches: vec![
                SwitchSpec::with_ports(1, 2),
                SwitchSpec::with_ports(2, 2),
                SwitchSpec::with_ports(3, 2),
            ],
            hosts: vec![HostSpec::new("h1", 1, 2), HostSpec::new("h2", 3, 2)],
            links: vec![LinkSpec::new((1, 1), (2, 1)), LinkSpec::new((2, 2), (3, 1))],
        }
    }
}
