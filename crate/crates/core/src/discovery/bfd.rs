//! Simplified per-port liveness session.
//!
//! A session transmits one hello per `tx_interval` and checks, on the same
//! tick, whether anything arrived since the previous check. `detect_mult`
//! consecutive silent intervals bring it down; any hello brings it up.

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BfdConfig {
    pub tx_interval: SimTime,
    pub detect_mult: u32,
}

impl Default for BfdConfig {
    fn default() -> Self {
        BfdConfig {
            tx_interval: SimTime::from_millis(100),
            detect_mult: 3,
        }
    }
}

impl BfdConfig {
    /// Worst-case time from the last hello arriving to a down declaration.
    pub fn detection_bound(&self) -> SimTime {
        SimTime(self.tx_interval.as_micros() * (self.detect_mult as u64 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BfdState {
    Down,
    Up,
}

#[derive(Debug, Clone)]
pub struct BfdSession {
    config: BfdConfig,
    state: BfdState,
    heard: bool,
    misses: u32,
}

impl BfdSession {
    pub fn new(config: BfdConfig) -> Self {
        BfdSession {
            config,
            state: BfdState::Down,
            heard: false,
            misses: 0,
        }
    }

    pub fn state(&self) -> BfdState {
        self.state
    }

    pub fn config(&self) -> &BfdConfig {
        &self.config
    }

    /// A hello arrived. Returns the new state on a transition.
    pub fn on_rx(&mut self) -> Option<BfdState> {
        self.heard = true;
        self.misses = 0;
        if self.state == BfdState::Down {
            self.state = BfdState::Up;
            Some(BfdState::Up)
        } else {
            None
        }
    }

    /// End of one tx interval. Returns the new state on a transition.
    pub fn on_tick(&mut self) -> Option<BfdState> {
        if self.heard {
            self.misses = 0;
        } else {
            self.misses += 1;
        }
        self.heard = false;
        if self.state == BfdState::Up && self.misses >= self.config.detect_mult {
            self.state = BfdState::Down;
            Some(BfdState::Down)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Channel, ChannelId, ChannelModel, Decision, LossModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn healthy_link_stays_up() {
        let mut s = BfdSession::new(BfdConfig::default());
        assert_eq!(s.on_rx(), Some(BfdState::Up));
        for _ in 0..1000 {
            assert_eq!(s.on_tick(), None);
            assert_eq!(s.on_rx(), None);
        }
        assert_eq!(s.state(), BfdState::Up);
    }

    /// Steps hello arrivals and local checks on a microsecond timeline.
    fn detection_delay(peer_phase: u64, local_phase: u64, latency: u64, cut: u64) -> u64 {
        let cfg = BfdConfig::default();
        let tx = cfg.tx_interval.as_micros();
        let mut s = BfdSession::new(cfg);
        let mut t = 0u64;
        loop {
            // a hello is lost if it was sent at or after the cut
            let rx = (t >= peer_phase + latency)
                && (t - peer_phase - latency).is_multiple_of(tx)
                && t - latency < cut;
            let tick = t >= local_phase && (t - local_phase).is_multiple_of(tx);
            if rx {
                s.on_rx();
            }
            if tick && s.on_tick() == Some(BfdState::Down) {
                assert!(t > cut);
                return t - cut;
            }
            t += 1_000;
        }
    }

    #[test]
    fn cut_detected_within_mult_plus_one_intervals() {
        let bound = BfdConfig::default().detection_bound().as_micros();
        assert_eq!(bound, 400_000);
        let latency = 1_000;
        let mut worst = 0;
        for peer in (0..100_000).step_by(7_000) {
            for local in (0..100_000).step_by(9_000) {
                for cut in (1_000_000..1_100_000).step_by(11_000) {
                    let d = detection_delay(peer, local, latency, cut);
                    worst = worst.max(d);
                    assert!(d <= bound + latency, "delay {d} peer {peer} local {local} cut {cut}");
                }
            }
        }
        // the bound is nearly tight
        assert!(worst > 300_000);
    }

    #[test]
    fn false_down_rate_under_half_loss() {
        let lossy = ChannelModel {
            latency_us: 10,
            loss: LossModel::Bernoulli { q: 0.5 },
        };
        let mut ch = Channel::new(ChannelId::Relay { from: "bfd".into() }, lossy);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let windows = 10_000u32;
        let mut downs = 0u32;
        for w in 0..windows {
            let mut s = BfdSession::new(BfdConfig::default());
            s.on_rx();
            s.on_tick();
            for k in 0..3u64 {
                let now = SimTime((w as u64 * 4 + k) * 100_000);
                if let Decision::Delivered { .. } = ch.decide(now, &mut rng) {
                    s.on_rx();
                }
                if s.on_tick() == Some(BfdState::Down) {
                    downs += 1;
                }
            }
        }
        // binomial(10_000, 0.125): mean 1250, sigma ≈ 33.07
        let sigma = (windows as f64 * 0.125 * 0.875).sqrt();
        assert!(
            (downs as f64 - 1250.0).abs() <= 3.0 * sigma,
            "observed {downs} false downs"
        );
    }
}
