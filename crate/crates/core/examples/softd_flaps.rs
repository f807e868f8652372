//! Ten minutes of a flapping link under each discovery mode, tabulated.

use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::report::{compare, run};
use ofdp_lab::scenario::{presets, DiscoverySpec, ScenarioSpec};
use ofdp_lab::sim::SimTime;
use ofdp_lab::topology::{PortId, TopologyEvent};

fn main() {
    let (a, b) = (PortId::new(1, 1), PortId::new(2, 1));
    let events: Vec<_> = (0..10)
        .flat_map(|k| {
            let t = 30.2 + 60.0 * k as f64;
            [
                TopologyEvent::link_down(SimTime::from_secs_f64(t), a, b),
                TopologyEvent::link_up(SimTime::from_secs_f64(t + 1.0), a, b),
            ]
        })
        .collect();

    let mut reports = Vec::new();
    for mode in [DiscoveryMode::Ofdp, DiscoveryMode::Ofdpv2, DiscoveryMode::Softd] {
        let mut spec = ScenarioSpec::new(presets::ring4());
        spec.name = format!("ring4-{mode:?}").to_lowercase();
        spec.discovery = DiscoverySpec::for_mode(mode);
        if mode == DiscoveryMode::Softd {
            spec.discovery = spec.discovery.with_key_hex("6f66647020746573742d6b6579203031");
        }
        spec.events = events.clone();
        spec.duration_s = 600.0;
        let out = run(&spec.validate().expect("valid")).expect("run completes");
        let cuts: Vec<f64> = out
            .report
            .convergence
            .iter()
            .filter(|c| c.kind == "link-down")
            .filter_map(|c| c.links_removed_at.map(|t| (t - c.at).as_secs_f64()))
            .collect();
        let detection = match cuts.iter().copied().reduce(f64::max) {
            Some(w) => format!("{} of 10 cuts seen, slowest after {w:.3}s", cuts.len()),
            None => "no cut seen before the link returned".into(),
        };
        println!(
            "{:<14} discovery messages {:>5}, controller-bound {:>5}, {detection}",
            spec.name, out.report.discovery.total, out.report.discovery.controller_bound
        );
        reports.push(out.report);
    }
    println!("\n{}", compare(&reports).expect("same topology"));
}
