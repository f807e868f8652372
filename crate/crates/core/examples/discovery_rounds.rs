//! Per-round message counts of OFDP and OFDPv2 on a small ring.

use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::report::run;
use ofdp_lab::scenario::{presets, DiscoverySpec, ScenarioSpec};

fn main() {
    let topology = presets::ring4();
    for mode in [DiscoveryMode::Ofdp, DiscoveryMode::Ofdpv2] {
        let mut spec = ScenarioSpec::new(topology.clone());
        spec.discovery = DiscoverySpec::for_mode(mode);
        spec.duration_s = 20.0;
        let scn = spec.validate().expect("preset scenario is valid");
        let out = run(&scn).expect("run completes");
        let c = &out.report.controllers[0];
        println!("{mode:?}: {} switches, {} ports, {} links", scn.truth.switch_count(), scn.truth.total_ports(), scn.truth.link_count());
        for r in &c.rounds {
            println!(
                "  round {} at {:>5.1}s: {} packet-outs, {} packet-ins",
                r.round_index,
                r.started_at.as_secs_f64(),
                r.packet_outs,
                r.packet_ins
            );
        }
        println!("  view exact: {}", c.final_diff.is_exact());
    }
}
