//! Loads a scenario file, runs it, and prints a short summary.
//!
//! cargo run --example scenario_file -- scenarios/ring4-spoof.json

use ofdp_lab::report::{audit, run};
use ofdp_lab::scenario::load_scenario;

fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "scenarios/ring4-softd-flaps.json".into());
    let scn = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let out = run(&scn).expect("run completes");
    audit(&out.report, &out.trace).expect("report matches its trace");
    let r = &out.report;
    println!("{} ({}, {} s, seed {})", r.scenario, r.mode, r.duration_s, r.seed);
    println!("  trace entries      {}", r.trace_entries);
    println!("  discovery messages {} ({} controller-bound)", r.discovery.total, r.discovery.controller_bound);
    for c in &r.controllers {
        println!(
            "  controller {}: {} links, {} phantom, {} missing",
            c.index,
            c.final_links.len(),
            c.final_diff.phantom_links.len(),
            c.final_diff.missing_links.len()
        );
    }
    for a in &r.attacks {
        println!("  attack {} {}: succeeded={}", a.index, a.kind, a.succeeded);
    }
}
