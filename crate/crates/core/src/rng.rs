//! Seeded random streams.
//!
//! Every stochastic element of a replica (a channel's occupancy, a sensor's
//! noise, an access coin, a tunnel's loss draw) owns its own ChaCha stream
//! keyed by `(master seed, domain, a, b)`. Adding an element never shifts
//! the draws seen by the others, and two schemes run on the same seed see
//! the same primary-user trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which part of the simulation a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Occupancy = 1,
    Sensing = 2,
    Access = 3,
    Loss = 4,
}

pub fn stream(master_seed: u64, domain: Domain, a: u32, b: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let id = ((domain as u64) << 56) | ((a as u64) << 28) | (b as u64 & 0x0fff_ffff);
    rng.set_stream(id);
    rng
}
