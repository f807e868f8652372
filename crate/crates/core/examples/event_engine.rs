//! The bare engine: a ping-pong handler over a lossy channel, with its trace.

use ofdp_lab::sim::{
    Channel, ChannelId, ChannelModel, Engine, Handler, LossModel, Origin, PacketKind, PacketMeta, SimError, SimTime,
};
use ofdp_lab::topology::{Dpid, PortId};

struct PingPong {
    link: Channel,
    arrived: Vec<u32>,
}

enum Ev {
    Send,
    Arrive(u32),
}

impl Handler for PingPong {
    type Event = Ev;

    fn handle(&mut self, sim: &mut Engine<Ev>, event: Ev) -> Result<(), SimError> {
        match event {
            Ev::Send => {
                let meta = PacketMeta::new(PacketKind::Lldp, Origin::Switch { dpid: Dpid(1) });
                let n = sim.trace().len() as u32;
                sim.transmit(&mut self.link, meta, Ev::Arrive(n))?;
                if sim.now() < SimTime::from_millis(90) {
                    sim.schedule_in(SimTime::from_millis(10), Ev::Send)?;
                }
            }
            Ev::Arrive(n) => self.arrived.push(n),
        }
        Ok(())
    }
}

fn main() {
    for seed in [1, 2] {
        let mut sim = Engine::new(seed);
        let model = ChannelModel {
            latency_us: 2_500,
            loss: LossModel::Bernoulli { q: 0.3 },
        };
        let mut world = PingPong {
            link: Channel::new(ChannelId::Link { from: PortId::new(1, 1) }, model),
            arrived: Vec::new(),
        };
        sim.schedule(SimTime::ZERO, Ev::Send).expect("clock starts at zero");
        sim.run_until(&mut world, SimTime::from_millis(200)).expect("no handler errors");
        let trace = sim.into_trace();
        println!("seed {seed}: {} sent, arrived {:?}", trace.len(), world.arrived);
        for e in &trace {
            println!("  #{:<2} t={:>6}us {:?}", e.seq, e.sent_at.as_micros(), e.outcome);
        }
    }
}
