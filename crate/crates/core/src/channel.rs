//! Licensed channels as independent two-state discrete-time Markov chains.
//!
//! State 0 is idle, state 1 is busy. `lambda` is the probability of staying
//! idle, `mu` the probability of a busy channel turning idle.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Occupancy {
    Idle,
    Busy,
}

impl Occupancy {
    pub fn is_idle(self) -> bool {
        self == Occupancy::Idle
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovChannel {
    lambda: f64,
    mu: f64,
    pub state: Occupancy,
}

impl MarkovChannel {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        check_probability("lambda", lambda)?;
        check_probability("mu", mu)?;
        Ok(Self {
            lambda,
            mu,
            state: Occupancy::Idle,
        })
    }

    /// Builds a chain with busy fraction `eta` and lag-one correlation
    /// `memory = lambda - mu`. Any `eta` in [0, 1] and `memory` in [0, 1)
    /// map to valid transition probabilities.
    pub fn from_utilization(eta: f64, memory: f64) -> Result<Self> {
        check_probability("eta", eta)?;
        if !(0.0..1.0).contains(&memory) {
            return Err(Error::invalid("memory", format!("{memory} must lie in [0, 1)")));
        }
        let lambda = 1.0 - eta * (1.0 - memory);
        let mu = (1.0 - memory) * (1.0 - eta);
        Self::new(lambda.clamp(0.0, 1.0), mu.clamp(0.0, 1.0))
    }

    pub fn with_state(mut self, state: Occupancy) -> Self {
        self.state = state;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Long-run busy fraction.
    pub fn utilization(&self) -> f64 {
        utilization(self.lambda, self.mu)
    }

    /// Advances one slot using the uniform draw `u` in [0, 1).
    pub fn advance(&mut self, u: f64) {
        self.state = match self.state {
            Occupancy::Idle if u < self.lambda => Occupancy::Idle,
            Occupancy::Idle => Occupancy::Busy,
            Occupancy::Busy if u < self.mu => Occupancy::Idle,
            Occupancy::Busy => Occupancy::Busy,
        };
    }
}

/// `(1 - lambda) / (1 - lambda + mu)`; a chain that can never leave idle
/// (`lambda = 1`, `mu = 0`) has utilization 0.
pub fn utilization(lambda: f64, mu: f64) -> f64 {
    let denom = 1.0 - lambda + mu;
    if denom <= 0.0 {
        0.0
    } else {
        (1.0 - lambda) / denom
    }
}

/// Identifies a licensed channel: primary network `network`, channel `channel`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelKey {
    pub network: u32,
    pub channel: u32,
}

#[derive(Debug, Clone)]
struct Slot {
    key: ChannelKey,
    chain: MarkovChannel,
    rng: ChaCha8Rng,
}

/// The ground-truth occupancy of every licensed channel.
#[derive(Debug, Clone)]
pub struct ChannelBank {
    slots: Vec<Slot>,
    slot_counter: u64,
}

impl ChannelBank {
    /// Each channel gets its own stream derived from `master_seed` and its
    /// key; initial states are drawn from the stationary distribution.
    pub fn new(channels: impl IntoIterator<Item = (ChannelKey, MarkovChannel)>, master_seed: u64) -> Result<Self> {
        let mut slots: Vec<Slot> = Vec::new();
        for (key, mut chain) in channels {
            if slots.iter().any(|s| s.key == key) {
                return Err(Error::invalid(
                    "channels",
                    format!("duplicate channel (network {}, channel {})", key.network, key.channel),
                ));
            }
            let mut rng = rng::stream(master_seed, Domain::Occupancy, key.network, key.channel);
            chain.state = if rng.gen::<f64>() < chain.utilization() {
                Occupancy::Busy
            } else {
                Occupancy::Idle
            };
            slots.push(Slot { key, chain, rng });
        }
        Ok(Self { slots, slot_counter: 0 })
    }

    pub fn step(&mut self) {
        for slot in &mut self.slots {
            let u = slot.rng.gen::<f64>();
            slot.chain.advance(u);
        }
        self.slot_counter += 1;
    }

    pub fn slot(&self) -> u64 {
        self.slot_counter
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn key(&self, idx: usize) -> ChannelKey {
        self.slots[idx].key
    }

    pub fn channel(&self, idx: usize) -> &MarkovChannel {
        &self.slots[idx].chain
    }

    pub fn state(&self, idx: usize) -> Occupancy {
        self.slots[idx].chain.state
    }

    pub fn index_of(&self, key: ChannelKey) -> Option<usize> {
        self.slots.iter().position(|s| s.key == key)
    }

    pub fn states(&self) -> impl Iterator<Item = Occupancy> + '_ {
        self.slots.iter().map(|s| s.chain.state)
    }
}

/// Per-channel access bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelAudit {
    pub slots: u64,
    pub accesses: u64,
    pub collisions: u64,
    pub busy: u64,
}

impl ChannelAudit {
    pub fn collision_rate(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.collisions as f64 / self.slots as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn utilization_examples() {
        assert!((utilization(0.8, 0.2) - 0.5).abs() < 1e-15);
        assert_eq!(utilization(1.0, 0.5), 0.0);
        assert!((utilization(0.6, 0.2) - 0.4 / 0.6).abs() < 1e-15);
        assert_eq!(utilization(1.0, 0.0), 0.0);
    }

    #[test]
    fn utilization_matches_long_run_average() {
        let chain = MarkovChannel::new(0.6, 0.2).unwrap();
        let mut bank = ChannelBank::new([(ChannelKey { network: 0, channel: 0 }, chain)], 11).unwrap();
        let n = 1_000_000;
        let mut busy = 0u64;
        for _ in 0..n {
            bank.step();
            busy += (bank.state(0) == Occupancy::Busy) as u64;
        }
        assert!((busy as f64 / n as f64 - 0.6667).abs() < 0.01);
    }

    #[test]
    fn absorbing_and_forced_transitions() {
        let mut idle = MarkovChannel::new(1.0, 0.3).unwrap();
        let mut busy = MarkovChannel::new(0.2, 1.0).unwrap().with_state(Occupancy::Busy);
        for i in 0..100 {
            let u = i as f64 / 100.0;
            idle.advance(u);
            assert_eq!(idle.state, Occupancy::Idle);
            let mut b = busy.with_state(Occupancy::Busy);
            b.advance(u);
            assert_eq!(b.state, Occupancy::Idle);
        }
        busy.advance(0.999);
        assert_eq!(busy.state, Occupancy::Idle);
    }

    #[test]
    fn from_utilization_round_trips() {
        for &eta in &[0.0, 0.3, 0.6, 0.9, 1.0] {
            for &memory in &[0.0, 0.5, 0.9] {
                let ch = MarkovChannel::from_utilization(eta, memory).unwrap();
                assert!((ch.utilization() - eta).abs() < 1e-12, "eta {eta} memory {memory}");
                assert!((ch.lambda() - ch.mu() - memory).abs() < 1e-12 || eta == 1.0 || eta == 0.0);
            }
        }
        assert!(MarkovChannel::from_utilization(0.5, 1.0).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(MarkovChannel::new(1.2, 0.1).is_err());
        assert!(MarkovChannel::new(0.5, -0.1).is_err());
        assert!(MarkovChannel::new(f64::NAN, 0.1).is_err());
    }

    #[test]
    fn adding_a_channel_keeps_existing_trajectories() {
        let k0 = ChannelKey { network: 0, channel: 0 };
        let k1 = ChannelKey { network: 0, channel: 1 };
        let ch = MarkovChannel::new(0.7, 0.4).unwrap();
        let mut a = ChannelBank::new([(k0, ch)], 5).unwrap();
        let mut b = ChannelBank::new([(k1, ch), (k0, ch)], 5).unwrap();
        for _ in 0..1000 {
            a.step();
            b.step();
            assert_eq!(a.state(0), b.state(1));
        }
    }

    #[test]
    fn duplicate_keys_rejected() {
        let k = ChannelKey { network: 1, channel: 2 };
        let ch = MarkovChannel::new(0.7, 0.4).unwrap();
        assert!(ChannelBank::new([(k, ch), (k, ch)], 0).is_err());
    }
}
