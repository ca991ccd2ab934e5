//! Seeded, counter-keyed random streams.
//!
//! Every stream is a ChaCha8 generator keyed by a 64-bit seed with an explicit
//! stream id, so draws for a given (seed, stream) never depend on which worker
//! produced them or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed and a path of counters
/// (replication index, purpose tag, ...).
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(master), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(0x5851_F42D))))
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Purpose tags used when splitting replication seeds.
pub mod purpose {
    pub const DATA: u64 = 1;
    pub const SIM: u64 = 2;
    pub const COVARIATES: u64 = 3;
    pub const OVERID: u64 = 4;
}
