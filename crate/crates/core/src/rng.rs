//! Seeded random streams.
//!
//! Every pulse draws from its own generator keyed by (run seed, physical
//! pulse index), so any partition of a window into sub-ranges, on any
//! number of threads, consumes exactly the same random numbers. The drift
//! trajectory is sequential and gets a single dedicated ChaCha stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used inside the per-pulse hot loop.
pub type PulseRng = Xoshiro256PlusPlus;

/// Generator for sequential processes (drift walks).
pub type StreamRng = ChaCha8Rng;

const PULSE_DOMAIN: u64 = 0x5155_4b44_5055_4c53;
const DRIFT_STREAM: u64 = 0x0044_5249_4654;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key shared by all pulses of one run; hoisted out of the hot loop.
#[inline]
pub fn pulse_domain_key(seed: u64) -> u64 {
    mix64(seed ^ PULSE_DOMAIN)
}

#[inline]
pub fn pulse_rng_from_key(domain_key: u64, pulse_index: u64) -> PulseRng {
    PulseRng::seed_from_u64(mix64(
        domain_key ^ pulse_index.wrapping_mul(0x9e37_79b9_7f4a_7c15),
    ))
}

/// Independent generator for one physical pulse.
pub fn pulse_rng(seed: u64, pulse_index: u64) -> PulseRng {
    pulse_rng_from_key(pulse_domain_key(seed), pulse_index)
}

/// Generator for the drift trajectory of a run.
pub fn drift_rng(seed: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DRIFT_STREAM);
    rng
}

/// Generic named auxiliary stream, for tests and tools that need more
/// randomness from the same seed without touching the simulation streams.
pub fn aux_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_add(1 << 40));
    rng
}
