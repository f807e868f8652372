//! A compromised switch adopts its neighbour's identity and splices the ring.

use ofdp_lab::attacks::AttackerSpec;
use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::lldp::{ChassisEncoding, ControllerProfile};
use ofdp_lab::report::run;
use ofdp_lab::scenario::{presets, DiscoverySpec, ProfileRef, ScenarioSpec};
use ofdp_lab::topology::Dpid;

fn attempt(label: &str, dpid_identity: bool) {
    let mut spec = ScenarioSpec::new(presets::ring4());
    spec.discovery = DiscoverySpec::for_mode(DiscoveryMode::Ofdp);
    if dpid_identity {
        let mut p = ControllerProfile::pox_like();
        p.chassis_encoding = ChassisEncoding::DpidAsId;
        spec.discovery.profile = ProfileRef::Inline(p);
        spec.discovery.channel_binding = true;
    }
    spec.duration_s = 40.0;
    spec.attackers.push(AttackerSpec::SwitchSpoof {
        attacker: Dpid(4),
        victim: Dpid(1),
        start_s: 0.0,
    });
    let out = run(&spec.validate().expect("valid")).expect("run completes");
    let a = &out.report.attacks[0];
    let c = &out.report.controllers[0];
    println!("{label}: succeeded={} rejected connections={}", a.succeeded, c.counters.rejected_connections);
    for l in &c.final_diff.phantom_links {
        println!("  phantom {l}");
    }
    for l in &c.final_diff.missing_links {
        println!("  missing {l}");
    }
}

fn main() {
    attempt("mac-as-id", false);
    attempt("dpid-as-id with channel binding", true);
}
