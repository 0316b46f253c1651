//! Seed derivation for independent, counter-addressed random streams.
//!
//! Every random draw in training and evaluation comes from a ChaCha stream
//! whose seed is a pure function of `(base seed, purpose, counters...)`, so
//! results never depend on the order in which streams are consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different consumers disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    DropEdge = 2,
    Negatives = 3,
    Stability = 4,
    Risk = 5,
    Generator = 6,
    Toy = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed, a purpose tag and any number of counters into one seed.
pub fn derive_seed(base: u64, stream: Stream, counters: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    for &c in counters {
        h = splitmix64(h ^ c);
    }
    h
}

pub fn stream_rng(base: u64, stream: Stream, counters: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, counters))
}
