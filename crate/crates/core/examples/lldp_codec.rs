//! Encodes a discovery probe, signs it, and shows what a single flipped bit does.

use ofdp_lab::lldp::{attach_hmac, verify_hmac, ControllerProfile, HmacKey, LldpFrame};
use ofdp_lab::topology::{Dpid, MacAddr};

fn main() {
    let profile = ControllerProfile::pox_like();
    let probe = profile.probe_frame(
        MacAddr::new([0x02, 0xc0, 0, 0, 0, 0x01]),
        Dpid(3),
        Dpid(3).embedded_mac(),
        2,
    );
    let plain = probe.encode().expect("probe fits");
    println!("plain probe ({} bytes): {}", plain.len(), hex::encode(&plain));

    let key = HmacKey::from_hex("6f66647020746573742d6b6579203031").expect("16-byte key");
    let signed = attach_hmac(&probe, &key);
    let mut bytes = signed.encode().expect("signed probe fits");
    println!("signed probe ({} bytes): {}", bytes.len(), hex::encode(&bytes));

    let back = LldpFrame::decode(&bytes).expect("round-trips");
    println!("decoded chassis {:02x?}, port {:?}, verifies: {}", back.chassis.value, back.port.as_port_no(), verify_hmac(&back, &key));

    bytes[20] ^= 0x01;
    match LldpFrame::decode(&bytes) {
        Ok(f) => println!("after flipping one bit: verifies = {}", verify_hmac(&f, &key)),
        Err(e) => println!("after flipping one bit: {e}"),
    }
}
