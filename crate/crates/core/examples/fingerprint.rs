//! A host listens to the probes reaching it and guesses the controller.

use ofdp_lab::attacks::AttackerSpec;
use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::lldp::{builtin_profiles, ControllerProfile};
use ofdp_lab::report::run;
use ofdp_lab::scenario::{presets, DiscoverySpec, ProfileRef, ScenarioSpec};
use ofdp_lab::topology::HostId;

fn main() {
    let mut targets: Vec<(String, DiscoveryMode, ControllerProfile)> = builtin_profiles()
        .into_iter()
        .map(|p| (p.name.clone(), DiscoveryMode::Ofdp, p))
        .collect();
    targets.push(("softd".into(), DiscoveryMode::Softd, ControllerProfile::pox_like()));

    for (label, mode, profile) in targets {
        let mut spec = ScenarioSpec::new(presets::line3_hosts());
        spec.discovery = DiscoverySpec::for_mode(mode);
        if mode == DiscoveryMode::Softd {
            spec.discovery = spec.discovery.with_key_hex("6f66647020746573742d6b6579203031");
        }
        spec.discovery.profile = ProfileRef::Inline(profile);
        spec.duration_s = 40.0;
        spec.attackers.push(AttackerSpec::Fingerprint {
            host: HostId("h1".into()),
            signature_db: None,
            answer_bfd: false,
        });
        let out = run(&spec.validate().expect("valid")).expect("run completes");
        let a = &out.report.attacks[0];
        let when = a.time_to_success_s.map_or("never".to_string(), |t| format!("at {t:.4}s"));
        println!(
            "{label:<16} identified as {:<16} from {} frames, {when}",
            a.controller_identified.as_deref().unwrap_or("unknown"),
            a.observed_frames.unwrap_or(0),
        );
    }
}
