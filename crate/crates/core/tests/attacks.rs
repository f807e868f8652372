mod common;

use std::collections::BTreeSet;

use common::*;
use ofdp_lab::attacks::AttackerSpec;
use ofdp_lab::discovery::{DiscoveryMode, RejectReason};
use ofdp_lab::lldp::{ChassisEncoding, ControllerProfile};
use ofdp_lab::scenario::ProfileRef;
use ofdp_lab::topology::{DirectedLink, PortId};

fn dl(a: (u64, u16), b: (u64, u16)) -> DirectedLink {
    DirectedLink {
        src: PortId::new(a.0, a.1),
        dst: PortId::new(b.0, b.1),
    }
}

#[test]
fn spoof_against_ofdp_adds_s1_s3_links() {
    let out = run_ok(&spoof(DiscoveryMode::Ofdp));
    let a = &out.report.attacks[0];
    assert!(a.succeeded);
    let expected: BTreeSet<_> = [dl((1, 1), (3, 2)), dl((3, 2), (1, 1))].into();
    assert_eq!(out.report.controllers[0].final_diff.phantom_links, expected);
    assert_eq!(a.phantom_links.iter().copied().collect::<BTreeSet<_>>(), expected);
    assert!(a.time_to_success_s.is_some());
}

#[test]
fn spoof_fails_with_dpid_identity_and_channel_binding() {
    let mut s = spoof(DiscoveryMode::Ofdp);
    let mut p = ControllerProfile::pox_like();
    p.chassis_encoding = ChassisEncoding::DpidAsId;
    s.discovery.profile = ProfileRef::Inline(p);
    s.discovery.channel_binding = true;
    let out = run_ok(&s);
    assert!(!out.report.attacks[0].succeeded);
    assert!(out.report.controllers[0].final_diff.phantom_links.is_empty());
    assert_eq!(out.report.controllers[0].counters.rejected_connections, 1);
}

#[test]
fn spoof_against_quiescent_softd_captures_nothing() {
    let mut s = spoof(DiscoveryMode::Softd);
    if let AttackerSpec::SwitchSpoof { start_s, .. } = &mut s.attackers[0] {
        *start_s = 5.0;
    }
    let out = run_ok(&s);
    assert!(!out.report.attacks[0].succeeded);
    assert_eq!(out.report.attacks[0].frames_sent, 0);
    assert!(out.report.controllers[0].final_diff.is_exact());
}

#[test]
fn relay_against_ofdp_fabricates_both_directions() {
    let out = run_ok(&relay(DiscoveryMode::Ofdp, 2_000));
    let a = &out.report.attacks[0];
    assert!(a.succeeded);
    let expected: BTreeSet<_> = [dl((1, 2), (3, 2)), dl((3, 2), (1, 2))].into();
    assert_eq!(a.phantom_links.iter().copied().collect::<BTreeSet<_>>(), expected);
    assert_eq!(a.hmac_bypassed, Some(false));
}

#[test]
fn relay_bypasses_hmac() {
    let mut s = relay(DiscoveryMode::Ofdp, 2_000);
    s.discovery.hmac_key = Some(KEY.into());
    let out = run_ok(&s);
    let a = &out.report.attacks[0];
    assert!(a.succeeded);
    assert_eq!(a.hmac_bypassed, Some(true));
    assert_eq!(a.phantom_links.len(), 2);
}

#[test]
fn relay_slower_than_forward_window_fails_against_softd() {
    let out = run_ok(&relay(DiscoveryMode::Softd, 1_500_000));
    assert!(!out.report.attacks[0].succeeded);
    assert!(out.report.controllers[0].final_diff.phantom_links.is_empty());
    // the relayed probes did cross the tunnel
    assert!(out.report.attacks[0].frames_sent >= 2);
}

#[test]
fn fast_relay_inside_the_window_succeeds_against_softd() {
    let out = run_ok(&relay(DiscoveryMode::Softd, 100_000));
    assert!(out.report.attacks[0].succeeded);
}

#[test]
fn inject_against_ofdp_fabricates_one_direction() {
    let out = run_ok(&inject(DiscoveryMode::Ofdp, false, None, 1.0));
    let a = &out.report.attacks[0];
    assert!(a.succeeded);
    assert_eq!(a.phantom_links, vec![dl((3, 1), (1, 2))]);
    assert!(!out.report.controllers[0].final_diff.phantom_links.contains(&dl((1, 2), (3, 1))));
}

#[test]
fn inject_with_forged_tags_fails_against_keyed_ofdp() {
    let mut s = inject(DiscoveryMode::Ofdp, true, Some(1_000), 0.01);
    s.discovery.hmac_key = Some(KEY.into());
    let out = run_ok(&s);
    let a = &out.report.attacks[0];
    assert!(!a.succeeded);
    assert_eq!(a.frames_sent, 1_000);
    let c = &out.report.controllers[0].counters;
    assert_eq!(c.rejected.get(&RejectReason::BadHmac).copied().unwrap_or(0), 1_000);
    assert!(out.report.diff_series.iter().all(|d| d.phantom == 0));
}

#[test]
fn inject_against_softd_never_reaches_the_controller() {
    let out = run_ok(&inject(DiscoveryMode::Softd, true, None, 0.5));
    let a = &out.report.attacks[0];
    assert!(!a.succeeded);
    assert!(a.frames_sent > 0);
    assert!(out.report.controllers[0].final_diff.phantom_links.is_empty());
}

#[test]
fn flood_against_ofdp_starves_discovery() {
    let out = run_ok(&flood(DiscoveryMode::Ofdp, 2_345.0));
    let a = &out.report.attacks[0];
    let f = a.flood.as_ref().unwrap();
    assert!(a.succeeded);
    assert!(f.legit_packet_in_drops >= 1);
    assert!(f.control_channel_drops > 0);
    assert!(!out.report.controllers[0].final_diff.missing_links.is_empty());
}

#[test]
fn flood_against_softd_is_dropped_outside_windows() {
    let out = run_ok(&flood(DiscoveryMode::Softd, 2_345.0));
    let f = out.report.attacks[0].flood.clone().unwrap();
    assert_eq!(f.controller_bound_outside_window, 0);
    assert_eq!(f.legit_packet_in_drops, 0);
    assert!(out.report.controllers[0].final_diff.is_exact());
}

#[test]
fn zero_rate_flood_matches_the_baseline() {
    let with = run_ok(&flood(DiscoveryMode::Ofdp, 0.0)).report;
    let mut base_spec = flood(DiscoveryMode::Ofdp, 0.0);
    base_spec.attackers.clear();
    let base = run_ok(&base_spec).report;
    assert_eq!(with.discovery, base.discovery);
    assert_eq!(with.totals, base.totals);
    assert_eq!(with.controllers, base.controllers);
    assert_eq!(with.attacks[0].flood.as_ref().unwrap().frames_sent, 0);
}

#[test]
fn fingerprint_identifies_after_two_rounds() {
    let out = run_ok(&fingerprint(DiscoveryMode::Ofdp));
    let a = &out.report.attacks[0];
    assert_eq!(a.controller_identified.as_deref(), Some("pox-like"));
    assert_eq!(a.observed_frames, Some(2));
    let t = a.time_to_success_s.unwrap();
    // second probe arrives one period after the first
    assert!((t - 5.0).abs() < 0.01, "identified at {t}");
}

#[test]
fn fingerprint_uses_the_period_to_split_profiles() {
    let mut slow = ControllerProfile::pox_like();
    slow.name = "pox-slow".into();
    slow.default_period_s = 10.0;
    let mut s = fingerprint(DiscoveryMode::Ofdp);
    s.discovery.profile = ProfileRef::Inline(slow.clone());
    s.duration_s = 25.0;
    if let AttackerSpec::Fingerprint { signature_db, .. } = &mut s.attackers[0] {
        *signature_db = Some(vec![ControllerProfile::pox_like(), slow]);
    }
    let out = run_ok(&s);
    assert_eq!(out.report.attacks[0].controller_identified.as_deref(), Some("pox-slow"));
}

#[test]
fn fingerprint_sees_nothing_in_quiescent_softd() {
    let out = run_ok(&fingerprint(DiscoveryMode::Softd));
    let a = &out.report.attacks[0];
    assert_eq!(a.controller_identified, None);
    assert_eq!(a.observed_frames, Some(0));
}
