//! Seeded RNG stream discipline shared by every Monte Carlo routine.
//!
//! Each replication owns a ChaCha8 generator keyed by `seed ⊕ mix(stream_id)`
//! and positioned on stream `stream_id`, so replications never share state and
//! results do not depend on which worker ran them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ mix64(stream_id));
    rng.set_stream(stream_id);
    rng
}

/// Derive an independent master seed for a named sub-experiment.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    tag.bytes()
        .fold(mix64(seed), |h, b| mix64(h ^ u64::from(b)))
}
