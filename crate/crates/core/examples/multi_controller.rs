//! Several controllers share the switches; each discovers independently.

use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::report::run;
use ofdp_lab::scenario::{presets, DiscoverySpec, ScenarioSpec};

fn main() {
    for mode in [DiscoveryMode::Ofdp, DiscoveryMode::Softd] {
        let mut base = None;
        for k in [1usize, 2, 4, 8] {
            let mut spec = ScenarioSpec::new(presets::ring4());
            spec.discovery = DiscoverySpec::for_mode(mode);
            if mode == DiscoveryMode::Softd {
                spec.discovery = spec.discovery.with_key_hex("6f66647020746573742d6b6579203031");
            }
            spec.controllers = k;
            spec.duration_s = 60.0;
            let out = run(&spec.validate().expect("valid")).expect("run completes");
            let total = out.report.discovery.total;
            let one = *base.get_or_insert(total);
            let exact = out.report.controllers.iter().all(|c| c.final_diff.is_exact());
            println!("{mode:?} k={k}: {total} discovery messages ({:.1}x), every view exact: {exact}", total as f64 / one as f64);
        }
    }
}
