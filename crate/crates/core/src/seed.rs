//! Seeded random streams.
//!
//! Every consumer of randomness draws from its own ChaCha8 stream: the root
//! seed picks the key, and a stream id (a domain tag in the high 32 bits, the
//! entity index in the low 32 bits) picks the ChaCha stream. Adding a base
//! station or a peer therefore never perturbs the draws of another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. The numeric values are part of the reproducibility
/// contract; do not renumber.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Domain {
    Popularity = 1,
    Arrivals = 2,
    PeerAvailability = 3,
    Snapshot = 4,
}

pub fn stream_id(domain: Domain, index: usize) -> u64 {
    ((domain as u64) << 32) | (index as u64 & 0xffff_ffff)
}

pub fn stream_rng(seed: u64, domain: Domain, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, index));
    rng
}
