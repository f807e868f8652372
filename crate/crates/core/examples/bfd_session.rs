//! Drives one liveness session by hand through a silence and a recovery.

use ofdp_lab::discovery::{BfdConfig, BfdSession};
use ofdp_lab::sim::SimTime;

fn main() {
    let cfg = BfdConfig::default();
    println!(
        "tx every {} ms, down after {} silent ticks, detection bound {} ms",
        cfg.tx_interval.as_micros() / 1_000,
        cfg.detect_mult,
        cfg.detection_bound().as_micros() / 1_000
    );
    let mut s = BfdSession::new(cfg);
    // the peer answers for five ticks, goes silent for five, then returns
    for tick in 0..14u64 {
        let t = SimTime::from_micros(tick * cfg.tx_interval.as_micros());
        if !(5..10).contains(&tick) {
            if let Some(state) = s.on_rx() {
                println!("{:>6.1} ms  hello received -> {state:?}", t.as_secs_f64() * 1e3);
            }
        }
        if let Some(state) = s.on_tick() {
            println!("{:>6.1} ms  tick -> {state:?}", t.as_secs_f64() * 1e3);
        }
    }
}
