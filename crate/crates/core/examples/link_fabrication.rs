//! Relay and injection attacks against plain, keyed, and event-driven discovery.

use ofdp_lab::attacks::AttackerSpec;
use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::report::run;
use ofdp_lab::scenario::{presets, DiscoverySpec, ScenarioSpec};
use ofdp_lab::topology::{Dpid, HostId};

const KEY: &str = "6f66647020746573742d6b6579203031";

fn relay(latency_us: u64) -> AttackerSpec {
    AttackerSpec::RelayFabrication {
        h1: HostId("h1".into()),
        h2: HostId("h2".into()),
        relay_latency_us: latency_us,
        answer_bfd: true,
    }
}

fn inject() -> AttackerSpec {
    AttackerSpec::InjectFabrication {
        host: HostId("h1".into()),
        claimed_dpid: Dpid(3),
        claimed_port: 1,
        interval_s: 0.5,
        forge_tag: true,
        count: None,
        start_s: 1.0,
    }
}

fn main() {
    let cases = [
        ("relay   vs ofdp", DiscoveryMode::Ofdp, false, relay(2_000)),
        ("relay   vs ofdp+hmac", DiscoveryMode::Ofdp, true, relay(2_000)),
        ("relay   vs softd (1.5s tunnel)", DiscoveryMode::Softd, true, relay(1_500_000)),
        ("inject  vs ofdp", DiscoveryMode::Ofdp, false, inject()),
        ("inject  vs ofdp+hmac", DiscoveryMode::Ofdp, true, inject()),
        ("inject  vs softd", DiscoveryMode::Softd, true, inject()),
    ];
    for (label, mode, keyed, attacker) in cases {
        let mut spec = ScenarioSpec::new(presets::line3_hosts());
        spec.discovery = DiscoverySpec::for_mode(mode);
        if keyed {
            spec.discovery = spec.discovery.with_key_hex(KEY);
        }
        spec.duration_s = 20.0;
        spec.attackers.push(attacker);
        let out = run(&spec.validate().expect("valid")).expect("run completes");
        let a = &out.report.attacks[0];
        let links: Vec<String> = a.phantom_links.iter().map(ToString::to_string).collect();
        println!(
            "{label:<32} succeeded={:<5} frames={:<3} rejected={:<3} phantoms=[{}]",
            a.succeeded,
            a.frames_sent,
            out.report.controllers[0].counters.rejected_total(),
            links.join(", ")
        );
    }
}
