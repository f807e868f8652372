use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{IdTlv, LldpFrame, Tlv, OFDP_MULTICAST};
use crate::topology::{Dpid, MacAddr};

/// How a controller fills the Chassis ID TLV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChassisEncoding {
    /// Local-port MAC of the switch, which the controller also keys switches on.
    MacAsId,
    /// The 64-bit DPID.
    DpidAsId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuePattern {
    #[serde(with = "hex::serde")]
    Exact(Vec<u8>),
    /// Matches any value starting with these bytes. When emitting, the
    /// switch DPID (8 bytes, big-endian) is appended.
    #[serde(with = "hex::serde")]
    Prefix(Vec<u8>),
    Any,
}

impl ValuePattern {
    pub fn matches(&self, v: &[u8]) -> bool {
        match self {
            ValuePattern::Exact(x) => v == x.as_slice(),
            ValuePattern::Prefix(p) => v.starts_with(p),
            ValuePattern::Any => true,
        }
    }

    fn emit(&self, dpid: Dpid) -> Vec<u8> {
        match self {
            ValuePattern::Exact(x) => x.clone(),
            ValuePattern::Prefix(p) => {
                let mut v = p.clone();
                v.extend_from_slice(&dpid.0.to_be_bytes());
                v
            }
            ValuePattern::Any => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TlvPattern {
    #[serde(rename = "type")]
    pub ty: u8,
    pub value: ValuePattern,
}

/// The LLDP "signature" of a controller implementation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerProfile {
    pub name: String,
    pub chassis_encoding: ChassisEncoding,
    #[serde(default)]
    pub optional_tlv_template: Vec<TlvPattern>,
    pub default_period_s: f64,
    #[serde(default = "default_ttl")]
    pub ttl_s: u16,
}

fn default_ttl() -> u16 {
    120
}

impl ControllerProfile {
    /// The probe this controller would send out of `(dpid, port_no)`.
    pub fn probe_frame(&self, src_mac: MacAddr, dpid: Dpid, local_mac: MacAddr, port_no: u16) -> LldpFrame {
        let chassis = match self.chassis_encoding {
            ChassisEncoding::MacAsId => IdTlv::mac(local_mac),
            ChassisEncoding::DpidAsId => IdTlv::dpid(dpid),
        };
        let mut f = LldpFrame::probe(src_mac, chassis, IdTlv::port(port_no), self.ttl_s);
        f.dst_mac = OFDP_MULTICAST;
        f.optional_tlvs = self
            .optional_tlv_template
            .iter()
            .map(|p| Tlv::new(p.ty, p.value.emit(dpid)))
            .collect();
        f
    }

    pub fn template_matches(&self, f: &LldpFrame) -> bool {
        f.optional_tlvs.len() == self.optional_tlv_template.len()
            && f
                .optional_tlvs
                .iter()
                .zip(&self.optional_tlv_template)
                .all(|(t, p)| t.ty == p.ty && p.value.matches(&t.value))
    }

    pub fn period_matches(&self, measured_s: f64) -> bool {
        (measured_s - self.default_period_s).abs() <= 0.1 * self.default_period_s
    }

    pub fn pox_like() -> Self {
        ControllerProfile {
            name: "pox-like".into(),
            chassis_encoding: ChassisEncoding::MacAsId,
            optional_tlv_template: vec![TlvPattern {
                ty: 6,
                value: ValuePattern::Prefix(b"dpid:".to_vec()),
            }],
            default_period_s: 5.0,
            ttl_s: 120,
        }
    }

    pub fn floodlight_like() -> Self {
        ControllerProfile {
            name: "floodlight-like".into(),
            chassis_encoding: ChassisEncoding::MacAsId,
            optional_tlv_template: vec![
                TlvPattern {
                    ty: 127,
                    value: ValuePattern::Prefix(vec![0x00, 0x26, 0xe1, 0x00]),
                },
                TlvPattern {
                    ty: 12,
                    value: ValuePattern::Prefix(b"ctl".to_vec()),
                },
            ],
            default_period_s: 15.0,
            ttl_s: 120,
        }
    }
}

/// The two shipped signatures. Their TLV contents are illustrative
/// placeholders, not captures of the real controllers.
pub fn builtin_profiles() -> Vec<ControllerProfile> {
    vec![ControllerProfile::pox_like(), ControllerProfile::floodlight_like()]
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("profile database: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("profiles {0:?} and {1:?} have the same template and period")]
    Indistinguishable(String, String),
    #[error("profile {0:?} has a non-positive default period")]
    BadPeriod(String),
}

/// Parses a JSON array of profiles and checks they are pairwise distinguishable.
pub fn load_profiles(json: &str) -> Result<Vec<ControllerProfile>, ProfileError> {
    let db: Vec<ControllerProfile> = serde_json::from_str(json)?;
    validate_profiles(&db)?;
    Ok(db)
}

pub fn validate_profiles(db: &[ControllerProfile]) -> Result<(), ProfileError> {
    for (i, a) in db.iter().enumerate() {
        if !(a.default_period_s > 0.0) {
            return Err(ProfileError::BadPeriod(a.name.clone()));
        }
        for b in &db[i + 1..] {
            if a.optional_tlv_template == b.optional_tlv_template
                && a.default_period_s == b.default_period_s
            {
                return Err(ProfileError::Indistinguishable(a.name.clone(), b.name.clone()));
            }
        }
    }
    Ok(())
}

/// Matches a captured probe (and optionally its measured inter-arrival
/// period) against a signature database. `None` when zero or several match.
pub fn fingerprint(
    captured: &LldpFrame,
    measured_period_s: Option<f64>,
    db: &[ControllerProfile],
) -> Option<String> {
    let mut hits = db.iter().filter(|p| {
        p.template_matches(captured) && measured_period_s.is_none_or(|m| p.period_matches(m))
    });
    match (hits.next(), hits.next()) {
        (Some(p), None) => Some(p.name.clone()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(p: &ControllerProfile) -> LldpFrame {
        p.probe_frame(MacAddr([2, 0, 0, 0, 0, 1]), Dpid(1), Dpid(1).embedded_mac(), 3)
    }

    #[test]
    fn self_match() {
        let db = builtin_profiles();
        for p in &db {
            assert_eq!(
                fingerprint(&frame(p), Some(p.default_period_s), &db).as_deref(),
                Some(p.name.as_str())
            );
        }
    }

    #[test]
    fn period_breaks_template_tie() {
        let mut five = ControllerProfile::pox_like();
        five.name = "five".into();
        let mut ten = five.clone();
        ten.name = "ten".into();
        ten.default_period_s = 10.0;
        let db = vec![five.clone(), ten];
        let f = frame(&five);
        assert_eq!(fingerprint(&f, None, &db), None);
        assert_eq!(fingerprint(&f, Some(10.0), &db).as_deref(), Some("ten"));
        assert_eq!(fingerprint(&f, Some(5.4), &db).as_deref(), Some("five"));
        assert_eq!(fingerprint(&f, Some(7.5), &db), None);
    }

    #[test]
    fn no_template_means_unknown() {
        let mut f = frame(&ControllerProfile::pox_like());
        f.optional_tlvs.clear();
        assert_eq!(fingerprint(&f, Some(5.0), &builtin_profiles()), None);
        f.optional_tlvs.push(Tlv::new(6, b"nope".to_vec()));
        assert_eq!(fingerprint(&f, None, &builtin_profiles()), None);
    }

    #[test]
    fn deterministic() {
        let db = builtin_profiles();
        let f = frame(&db[1]);
        let first = fingerprint(&f, Some(15.2), &db);
        for _ in 0..10 {
            assert_eq!(fingerprint(&f, Some(15.2), &db), first);
        }
    }

    #[test]
    fn db_from_json() {
        let json = serde_json::to_string(&builtin_profiles()).unwrap();
        assert_eq!(load_profiles(&json).unwrap(), builtin_profiles());
        let dup = serde_json::to_string(&vec![ControllerProfile::pox_like(); 2]).unwrap();
        assert!(matches!(
            load_profiles(&dup),
            Err(ProfileError::Indistinguishable(..))
        ));
    }
}
