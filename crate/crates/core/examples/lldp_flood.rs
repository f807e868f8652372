//! A host floods LLDP into a rate-limited control channel.

use ofdp_lab::attacks::AttackerSpec;
use ofdp_lab::discovery::DiscoveryMode;
use ofdp_lab::report::run;
use ofdp_lab::scenario::{presets, DiscoverySpec, ScenarioSpec};
use ofdp_lab::sim::{ChannelModel, LossModel};
use ofdp_lab::topology::HostId;

fn main() {
    for mode in [DiscoveryMode::Ofdp, DiscoveryMode::Softd] {
        let mut spec = ScenarioSpec::new(presets::line3_hosts());
        spec.discovery = DiscoverySpec::for_mode(mode);
        if mode == DiscoveryMode::Softd {
            spec.discovery = spec.discovery.with_key_hex("6f66647020746573742d6b6579203031");
        }
        spec.channels.control = ChannelModel {
            latency_us: 1_000,
            loss: LossModel::LoadThreshold {
                capacity: 50,
                window_us: 100_000,
            },
        };
        spec.duration_s = 16.0;
        spec.attackers.push(AttackerSpec::LldpFlood {
            host: HostId("h1".into()),
            rate_pps: 2_345.0,
            duration_s: 16.0,
            start_s: 0.0,
        });
        let out = run(&spec.validate().expect("valid")).expect("run completes");
        let f = out.report.attacks[0].flood.clone().expect("flood stats");
        println!("{mode:?}:");
        println!("  frames sent                  {}", f.frames_sent);
        println!("  reached a controller channel {}", f.controller_bound);
        println!("    inside forward windows     {}", f.controller_bound_in_window);
        println!("    outside forward windows    {}", f.controller_bound_outside_window);
        println!("  control-channel drops        {}", f.control_channel_drops);
        println!("  legitimate packet-ins lost   {}", f.legit_packet_in_drops);
        println!("  missing links at the end     {}", out.report.controllers[0].final_diff.missing_links.len());
    }
}
