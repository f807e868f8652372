#![allow(dead_code)]

use std::collections::BTreeSet;

use ofdp_lab::attacks::AttackerSpec;
use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::lldp::{attach_hmac, verify_hmac, HmacKey, HmacTag, IdTlv, LldpFrame, Tlv, TAG_LEN};
use ofdp_lab::report::{audit, run, RunOutput};
use ofdp_lab::scenario::{presets, DiscoverySpec, ScenarioSpec};
use ofdp_lab::sim::{ChannelModel, LossModel, SimTime};
use ofdp_lab::topology::{
    DirectedLink, Dpid, HostId, LinkSpec, MacAddr, PortId, PortsSpec, SwitchSpec, TopologyEvent, TopologySpec,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const KEY: &str = "6f66647020746573742d6b6579203031";

pub fn run_ok(spec: &ScenarioSpec) -> RunOutput {
    let scn = spec.validate().unwrap_or_else(|e| panic!("{e}"));
    let out = run(&scn).unwrap_or_else(|e| panic!("{e}"));
    if let Err(errs) = audit(&out.report, &out.trace) {
        panic!("audit failed: {errs:?}");
    }
    out
}

pub fn scenario(topology: TopologySpec, mode: DiscoveryMode, duration_s: f64) -> ScenarioSpec {
    let mut s = ScenarioSpec::new(topology);
    s.discovery = DiscoverySpec::for_mode(mode);
    if mode == DiscoveryMode::Softd {
        s.discovery.hmac_key = Some(KEY.into());
    }
    s.duration_s = duration_s;
    s
}

pub fn host(h: &str) -> HostId {
    HostId(h.into())
}

/// A link going down at `first + k·every` and back up `down_for` later.
pub fn flaps(a: PortId, b: PortId, first_s: f64, down_for_s: f64, every_s: f64, count: usize) -> Vec<TopologyEvent> {
    (0..count)
        .flat_map(|k| {
            let t = first_s + k as f64 * every_s;
            [
                TopologyEvent::link_down(SimTime::from_secs_f64(t), a, b),
                TopologyEvent::link_up(SimTime::from_secs_f64(t + down_for_s), a, b),
            ]
        })
        .collect()
}

pub fn spoof(mode: DiscoveryMode) -> ScenarioSpec {
    let mut s = scenario(presets::ring4(), mode, 40.0);
    s.attackers.push(AttackerSpec::SwitchSpoof {
        attacker: Dpid(4),
        victim: Dpid(1),
        start_s: 0.0,
    });
    s
}

pub fn relay(mode: DiscoveryMode, latency_us: u64) -> ScenarioSpec {
    let mut s = scenario(presets::line3_hosts(), mode, 20.0);
    s.attackers.push(AttackerSpec::RelayFabrication {
        h1: host("h1"),
        h2: host("h2"),
        relay_latency_us: latency_us,
        answer_bfd: true,
    });
    s
}

pub fn inject(mode: DiscoveryMode, forge_tag: bool, count: Option<u64>, interval_s: f64) -> ScenarioSpec {
    let mut s = scenario(presets::line3_hosts(), mode, 20.0);
    s.attackers.push(AttackerSpec::InjectFabrication {
        host: host("h1"),
        claimed_dpid: Dpid(3),
        claimed_port: 1,
        interval_s,
        forge_tag,
        count,
        start_s: 1.0,
    });
    s
}

pub fn flood(mode: DiscoveryMode, rate_pps: f64) -> ScenarioSpec {
    let mut s = scenario(presets::line3_hosts(), mode, 16.0);
    s.channels.control = ChannelModel {
        latency_us: 1_000,
        loss: LossModel::LoadThreshold {
            capacity: 50,
            window_us: 100_000,
        },
    };
    s.attackers.push(AttackerSpec::LldpFlood {
        host: host("h1"),
        rate_pps,
        duration_s: 16.0,
        start_s: 0.0,
    });
    s
}

pub fn fingerprint(mode: DiscoveryMode) -> ScenarioSpec {
    let mut s = scenario(presets::line3_hosts(), mode, 20.0);
    s.attackers.push(AttackerSpec::Fingerprint {
        host: host("h1"),
        signature_db: None,
        answer_bfd: false,
    });
    s
}

/// Random switch graph: `n` switches with 1..=max_ports ports each and a
/// random partial matching of ports across distinct switches as links.
pub fn random_topology(rng: &mut impl Rng, max_switches: u64, max_ports: u16) -> TopologySpec {
    let n = rng.random_range(1..=max_switches);
    let switches: Vec<_> = (1..=n)
        .map(|d| SwitchSpec::with_ports(d, rng.random_range(1..=max_ports)))
        .collect();
    let mut free: Vec<PortId> = switches
        .iter()
        .flat_map(|s| {
            let k = match s.ports {
                PortsSpec::Count(k) => k,
                PortsSpec::List(_) => unreachable!(),
            };
            (1..=k).map(move |p| PortId { dpid: s.dpid, port_no: p })
        })
        .collect();
    free.shuffle(rng);
    let mut links = Vec::new();
    while let Some(a) = free.pop() {
        if !rng.random_bool(0.7) {
            continue;
        }
        if let Some(i) = free.iter().position(|b| b.dpid != a.dpid) {
            let b = free.swap_remove(i);
            links.push(LinkSpec { a, b });
        }
    }
    TopologySpec {
        switches,
        hosts: vec![],
        links,
    }
}

/// Both directions of every declared link, without building the topology.
pub fn expected_links(spec: &TopologySpec) -> BTreeSet<DirectedLink> {
    let mut out = BTreeSet::new();
    for l in &spec.links {
        out.insert(DirectedLink { src: l.a, dst: l.b });
        out.insert(DirectedLink { src: l.b, dst: l.a });
    }
    out
}

pub fn total_ports(spec: &TopologySpec) -> u64 {
    spec.switches
        .iter()
        .map(|s| match &s.ports {
            PortsSpec::Count(k) => *k as u64,
            PortsSpec::List(v) => v.len() as u64,
        })
        .sum()
}

fn random_bytes(rng: &mut impl Rng, max: usize) -> Vec<u8> {
    let len = rng.random_range(0..max);
    (0..len).map(|_| rng.random()).collect()
}

pub fn random_frame(rng: &mut impl Rng) -> LldpFrame {
    let dst = MacAddr(rng.random());
    let src = MacAddr(rng.random());
    let chassis = IdTlv::new(rng.random(), random_bytes(rng, 40));
    let port = IdTlv::new(rng.random(), random_bytes(rng, 40));
    let mut f = LldpFrame::probe(src, chassis, port, rng.random());
    f.dst_mac = dst;
    for _ in 0..rng.random_range(0..6) {
        let ty = rng.random_range(1..=126);
        f.optional_tlvs.push(Tlv::new(ty, random_bytes(rng, 60)));
    }
    if rng.random_bool(0.5) {
        let mut tag = [0u8; TAG_LEN];
        rng.fill(&mut tag[..]);
        f.hmac = Some(HmacTag {
            nonce: rng.random_bool(0.5).then(|| rng.random()),
            tag,
        });
    }
    f
}

/// Runs `n` round-trips; returns how many decoded back to the same frame.
pub fn codec_round_trips(seed: u64, n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .filter(|_| {
            let f = random_frame(&mut rng);
            let b = f.encode().expect("random frames stay within TLV limits");
            LldpFrame::decode(&b).as_ref() == Ok(&f) && LldpFrame::decode(&b).unwrap().encode().as_ref() == Ok(&b)
        })
        .count()
}

/// Signs `n` random frames, flips one random bit of each, and counts rejections.
pub fn bit_flip_rejections(seed: u64, n: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = HmacKey::from_hex(KEY).unwrap();
    (0..n)
        .filter(|i| {
            let k = key.clone().with_nonce_mode(i % 2 == 1);
            let f = attach_hmac(&random_frame(&mut rng).without_hmac(), &k);
            let mut b = f.encode().unwrap();
            assert!(verify_hmac(&LldpFrame::decode(&b).unwrap(), &k));
            let bit = rng.random_range(0..b.len() * 8);
            b[bit / 8] ^= 1 << (bit % 8);
            match LldpFrame::decode(&b) {
                Ok(g) => !verify_hmac(&g, &k),
                Err(_) => true,
            }
        })
        .count()
}
