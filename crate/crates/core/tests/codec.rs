mod common;

use common::{bit_flip_rejections, codec_round_trips, KEY};
use ofdp_lab::lldp::{attach_hmac, attach_hmac_with_nonce, verify_hmac, HmacKey, IdTlv, LldpFrame};
use ofdp_lab::topology::{Dpid, MacAddr};

fn vector(name: &str) -> Vec<u8> {
    let path = format!("{}/tests/vectors/{name}.hex", env!("CARGO_MANIFEST_DIR"));
    hex::decode(std::fs::read_to_string(path).unwrap().trim()).unwrap()
}

fn mac_probe() -> LldpFrame {
    LldpFrame::probe(
        MacAddr([0x02, 0, 0, 0, 0, 0x01]),
        IdTlv::mac(MacAddr([0x00, 0x11, 0x22, 0x33, 0x44, 0x55])),
        IdTlv::port(1),
        120,
    )
}

fn dpid_probe() -> LldpFrame {
    LldpFrame::probe(MacAddr([0x02, 0xc0, 0, 0, 0, 0x01]), IdTlv::dpid(Dpid(3)), IdTlv::port(2), 120)
}

fn key(nonce_mode: bool) -> HmacKey {
    HmacKey::from_hex(KEY).unwrap().with_nonce_mode(nonce_mode)
}

#[test]
fn golden_plain_probes() {
    assert_eq!(mac_probe().encode().unwrap(), vector("probe_mac"));
    assert_eq!(dpid_probe().encode().unwrap(), vector("probe_dpid"));
    assert_eq!(LldpFrame::decode(&vector("probe_dpid")).unwrap(), dpid_probe());
}

#[test]
fn golden_signed_probes() {
    let signed = attach_hmac(&mac_probe(), &key(false));
    assert_eq!(signed.encode().unwrap(), vector("probe_mac_hmac"));
    let nonce = attach_hmac_with_nonce(&dpid_probe(), &key(true), 7);
    assert_eq!(nonce.encode().unwrap(), vector("probe_dpid_hmac_nonce"));
    assert!(verify_hmac(&LldpFrame::decode(&vector("probe_mac_hmac")).unwrap(), &key(false)));
    assert!(verify_hmac(&LldpFrame::decode(&vector("probe_dpid_hmac_nonce")).unwrap(), &key(true)));
}

#[test]
fn tag_mode_must_match_key_mode() {
    let plain = LldpFrame::decode(&vector("probe_mac_hmac")).unwrap();
    assert!(!verify_hmac(&plain, &key(true)));
    let nonce = LldpFrame::decode(&vector("probe_dpid_hmac_nonce")).unwrap();
    assert!(!verify_hmac(&nonce, &key(false)));
}

#[test]
fn wrong_key_rejects() {
    let other = HmacKey::from_hex("00112233445566778899aabbccddeeff").unwrap();
    assert!(!verify_hmac(&LldpFrame::decode(&vector("probe_mac_hmac")).unwrap(), &other));
}

#[test]
fn random_round_trips() {
    assert_eq!(codec_round_trips(11, 2_000), 2_000);
}

#[test]
fn single_bit_flips_are_rejected() {
    assert_eq!(bit_flip_rejections(12, 2_000), 2_000);
}
