//! LLDP discovery frames: bit-exact codec, HMAC authentication TLV and
//! controller fingerprinting.
//!
//! Wire layout: destination MAC, source MAC, ethertype `0x88cc`, then TLVs
//! with a 16-bit big-endian header `(type << 9) | length`. Chassis ID, Port ID
//! and TTL always come first in that order; the LLDPDU ends with a zero
//! header.

mod auth;
mod profile;

pub use auth::{attach_hmac, attach_hmac_with_nonce, verify_hmac, HmacKey, HmacKeyError};
pub use profile::{
    builtin_profiles, fingerprint, load_profiles, validate_profiles, ChassisEncoding, ControllerProfile,
    ProfileError,
    TlvPattern, ValuePattern,
};

use std::fmt;

use thiserror::Error;

use crate::topology::{Dpid, MacAddr};

pub const LLDP_ETHERTYPE: u16 = 0x88cc;

/// Destination used by OFDP probes so that 802.1d bridges do not swallow them.
pub const OFDP_MULTICAST: MacAddr = MacAddr::new([0x01, 0x23, 0x00, 0x00, 0x00, 0x01]);

pub const MAX_TLV_LEN: usize = 511;

pub const TLV_END: u8 = 0;
pub const TLV_CHASSIS_ID: u8 = 1;
pub const TLV_PORT_ID: u8 = 2;
pub const TLV_TTL: u8 = 3;
pub const TLV_ORG_SPECIFIC: u8 = 127;

pub const CHASSIS_SUBTYPE_MAC: u8 = 4;
pub const CHASSIS_SUBTYPE_LOCAL: u8 = 7;
pub const PORT_SUBTYPE_LOCAL: u8 = 7;

/// Length of the HMAC-SHA256 tag.
pub const TAG_LEN: usize = 32;

/// OUI and subtypes of the organizationally-specific TLV carrying the tag.
pub(crate) const HMAC_OUI: [u8; 3] = [0x00, 0x26, 0xe1];
pub(crate) const HMAC_SUBTYPE: u8 = 0xa0;
pub(crate) const HMAC_NONCE_SUBTYPE: u8 = 0xa1;

/// Chassis ID or Port ID TLV body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IdTlv {
    pub subtype: u8,
    pub value: Vec<u8>,
}

impl IdTlv {
    pub fn new(subtype: u8, value: impl Into<Vec<u8>>) -> Self {
        IdTlv {
            subtype,
            value: value.into(),
        }
    }

    pub fn mac(mac: MacAddr) -> Self {
        IdTlv::new(CHASSIS_SUBTYPE_MAC, mac.octets())
    }

    pub fn dpid(dpid: Dpid) -> Self {
        IdTlv::new(CHASSIS_SUBTYPE_LOCAL, dpid.0.to_be_bytes())
    }

    pub fn port(port_no: u16) -> Self {
        IdTlv::new(PORT_SUBTYPE_LOCAL, port_no.to_be_bytes())
    }

    /// The port number if this is a two-byte port identifier.
    pub fn as_port_no(&self) -> Option<u16> {
        <[u8; 2]>::try_from(self.value.as_slice())
            .ok()
            .map(u16::from_be_bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tlv {
    /// 7-bit TLV type, never 0.
    pub ty: u8,
    pub value: Vec<u8>,
}

impl Tlv {
    pub fn new(ty: u8, value: impl Into<Vec<u8>>) -> Self {
        Tlv {
            ty,
            value: value.into(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct HmacTag {
    /// Present when the per-packet key mode derived the signing key.
    pub nonce: Option<u64>,
    pub tag: [u8; TAG_LEN],
}

impl fmt::Debug for HmacTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HmacTag")
            .field("nonce", &self.nonce)
            .field("tag", &hex::encode(self.tag))
            .finish()
    }
}

impl HmacTag {
    fn tlv_value(&self) -> Vec<u8> {
        let mut v = HMAC_OUI.to_vec();
        match self.nonce {
            Some(n) => {
                v.push(HMAC_NONCE_SUBTYPE);
                v.extend_from_slice(&n.to_be_bytes());
            }
            None => v.push(HMAC_SUBTYPE),
        }
        v.extend_from_slice(&self.tag);
        v
    }

    fn from_tlv(t: &Tlv) -> Option<HmacTag> {
        if t.ty != TLV_ORG_SPECIFIC || t.value.len() < 4 || t.value[..3] != HMAC_OUI {
            return None;
        }
        let rest = &t.value[4..];
        match t.value[3] {
            HMAC_SUBTYPE if rest.len() == TAG_LEN => Some(HmacTag {
                nonce: None,
                tag: rest.try_into().ok()?,
            }),
            HMAC_NONCE_SUBTYPE if rest.len() == 8 + TAG_LEN => Some(HmacTag {
                nonce: Some(u64::from_be_bytes(rest[..8].try_into().ok()?)),
                tag: rest[8..].try_into().ok()?,
            }),
            _ => None,
        }
    }
}

/// A structured LLDP discovery frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LldpFrame {
    pub dst_mac: MacAddr,
    pub src_mac: MacAddr,
    pub ethertype: u16,
    pub chassis: IdTlv,
    pub port: IdTlv,
    /// TTL in seconds.
    pub ttl: u16,
    /// Everything between TTL and the HMAC TLV, in wire order.
    pub optional_tlvs: Vec<Tlv>,
    pub hmac: Option<HmacTag>,
}

impl LldpFrame {
    /// A probe addressed to the OFDP multicast MAC with no optional TLVs.
    pub fn probe(src_mac: MacAddr, chassis: IdTlv, port: IdTlv, ttl: u16) -> Self {
        LldpFrame {
            dst_mac: OFDP_MULTICAST,
            src_mac,
            ethertype: LLDP_ETHERTYPE,
            chassis,
            port,
            ttl,
            optional_tlvs: Vec::new(),
            hmac: None,
        }
    }

    pub fn without_hmac(&self) -> LldpFrame {
        LldpFrame {
            hmac: None,
            ..self.clone()
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, EncodeError> {
        encode(self)
    }

    pub fn decode(b: &[u8]) -> Result<LldpFrame, DecodeError> {
        decode(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("TLV type {ty} value of {len} bytes exceeds {MAX_TLV_LEN}")]
    TlvTooLong { ty: u8, len: usize },
    #[error("TLV type {0} is not a valid optional TLV type")]
    InvalidTlvType(u8),
    #[error("last optional TLV is indistinguishable from an HMAC TLV")]
    AmbiguousHmacTlv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MandatoryTlv {
    ChassisId,
    PortId,
    Ttl,
}

impl fmt::Display for MandatoryTlv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MandatoryTlv::ChassisId => "chassis ID",
            MandatoryTlv::PortId => "port ID",
            MandatoryTlv::Ttl => "TTL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame truncated at byte {0}")]
    Truncated(usize),
    #[error("ethertype {0:#06x} is not LLDP")]
    WrongEthertype(u16),
    #[error("missing mandatory {0} TLV")]
    MissingMandatoryTlv(MandatoryTlv),
    #[error("LLDPDU has no end TLV")]
    MissingTerminator,
    #[error("{0} bytes follow the end TLV")]
    TrailingBytes(usize),
    #[error("malformed {0} TLV")]
    Malformed(&'static str),
}

fn tlv_header(ty: u8, len: usize) -> [u8; 2] {
    (((ty as u16) << 9) | (len as u16 & 0x01ff)).to_be_bytes()
}

fn put_tlv(out: &mut Vec<u8>, ty: u8, parts: &[&[u8]]) {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    out.extend_from_slice(&tlv_header(ty, len));
    for p in parts {
        out.extend_from_slice(p);
    }
}

/// Everything up to (not including) the end TLV, without the HMAC TLV.
/// This is exactly the input of the authentication tag.
pub(crate) fn signed_bytes(f: &LldpFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(&f.dst_mac.octets());
    out.extend_from_slice(&f.src_mac.octets());
    out.extend_from_slice(&f.ethertype.to_be_bytes());
    put_tlv(&mut out, TLV_CHASSIS_ID, &[&[f.chassis.subtype], &f.chassis.value]);
    put_tlv(&mut out, TLV_PORT_ID, &[&[f.port.subtype], &f.port.value]);
    put_tlv(&mut out, TLV_TTL, &[&f.ttl.to_be_bytes()]);
    for t in &f.optional_tlvs {
        put_tlv(&mut out, t.ty, &[&t.value]);
    }
    out
}

pub fn encode(f: &LldpFrame) -> Result<Vec<u8>, EncodeError> {
    for (ty, len) in [
        (TLV_CHASSIS_ID, f.chassis.value.len() + 1),
        (TLV_PORT_ID, f.port.value.len() + 1),
    ] {
        if len > MAX_TLV_LEN {
            return Err(EncodeError::TlvTooLong { ty, len });
        }
    }
    for t in &f.optional_tlvs {
        if t.ty == TLV_END || t.ty > 127 {
            return Err(EncodeError::InvalidTlvType(t.ty));
        }
        if t.value.len() > MAX_TLV_LEN {
            return Err(EncodeError::TlvTooLong {
                ty: t.ty,
                len: t.value.len(),
            });
        }
    }
    if f.hmac.is_none() && f.optional_tlvs.last().and_then(HmacTag::from_tlv).is_some() {
        return Err(EncodeError::AmbiguousHmacTlv);
    }
    let mut out = signed_bytes(f);
    if let Some(tag) = &f.hmac {
        put_tlv(&mut out, TLV_ORG_SPECIFIC, &[&tag.tlv_value()]);
    }
    out.extend_from_slice(&tlv_header(TLV_END, 0));
    Ok(out)
}

struct TlvReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> TlvReader<'a> {
    /// `None` at a clean end of input.
    fn next(&mut self) -> Result<Option<(u8, &'a [u8])>, DecodeError> {
        let rest = &self.buf[self.pos..];
        match rest.len() {
            0 => return Ok(None),
            1 => return Err(DecodeError::Truncated(self.buf.len())),
            _ => {}
        }
        let h = u16::from_be_bytes([rest[0], rest[1]]);
        let ty = (h >> 9) as u8;
        let len = (h & 0x01ff) as usize;
        if rest.len() < 2 + len {
            return Err(DecodeError::Truncated(self.buf.len()));
        }
        self.pos += 2 + len;
        Ok(Some((ty, &rest[2..2 + len])))
    }
}

pub fn decode(b: &[u8]) -> Result<LldpFrame, DecodeError> {
    if b.len() < 14 {
        return Err(DecodeError::Truncated(b.len()));
    }
    let mac = |s: &[u8]| MacAddr(s.try_into().expect("six bytes"));
    let ethertype = u16::from_be_bytes([b[12], b[13]]);
    if ethertype != LLDP_ETHERTYPE {
        return Err(DecodeError::WrongEthertype(ethertype));
    }
    let mut r = TlvReader { buf: b, pos: 14 };

    let mut mandatory = |want: MandatoryTlv, ty: u8| -> Result<&[u8], DecodeError> {
        match r.next()? {
            Some((t, v)) if t == ty => Ok(v),
            _ => Err(DecodeError::MissingMandatoryTlv(want)),
        }
    };
    let chassis = mandatory(MandatoryTlv::ChassisId, TLV_CHASSIS_ID)?;
    let port = mandatory(MandatoryTlv::PortId, TLV_PORT_ID)?;
    let ttl = mandatory(MandatoryTlv::Ttl, TLV_TTL)?;
    let (Some((&chassis_sub, chassis_val)), Some((&port_sub, port_val))) =
        (chassis.split_first(), port.split_first())
    else {
        return Err(DecodeError::Malformed("chassis/port ID"));
    };
    let ttl: [u8; 2] = ttl.try_into().map_err(|_| DecodeError::Malformed("TTL"))?;

    let mut optional_tlvs = Vec::new();
    loop {
        match r.next()? {
            None => return Err(DecodeError::MissingTerminator),
            Some((TLV_END, v)) => {
                if !v.is_empty() {
                    return Err(DecodeError::Malformed("end"));
                }
                break;
            }
            Some((ty, v)) => optional_tlvs.push(Tlv::new(ty, v)),
        }
    }
    if r.pos != b.len() {
        return Err(DecodeError::TrailingBytes(b.len() - r.pos));
    }
    let hmac = optional_tlvs.last().and_then(HmacTag::from_tlv);
    if hmac.is_some() {
        optional_tlvs.pop();
    }
    Ok(LldpFrame {
        dst_mac: mac(&b[0..6]),
        src_mac: mac(&b[6..12]),
        ethertype,
        chassis: IdTlv::new(chassis_sub, chassis_val),
        port: IdTlv::new(port_sub, port_val),
        ttl: u16::from_be_bytes(ttl),
        optional_tlvs,
        hmac,
    })
}

/// Cheap ethertype peek used by flow matching.
pub fn is_lldp(bytes: &[u8]) -> bool {
    bytes.len() >= 14 && u16::from_be_bytes([bytes[12], bytes[13]]) == LLDP_ETHERTYPE
}

/// Source MAC of a raw Ethernet frame.
pub fn src_mac_of(bytes: &[u8]) -> Option<MacAddr> {
    bytes.get(6..12).map(|s| MacAddr(s.try_into().expect("six bytes")))
}
