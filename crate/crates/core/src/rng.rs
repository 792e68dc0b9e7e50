//! Seed derivation.
//!
//! Every random stream in the crate is a `ChaCha8Rng`. A stage seed is
//! derived from a root seed and a list of integer tags with a SplitMix64
//! chain, and independent sub-streams of one stage (one per tree, per
//! thinning iteration, ...) use ChaCha's 64-bit stream counter. Both steps
//! are platform independent, so results are bit-stable across machines and
//! thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and an ordered list of tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stage tags used by the pipeline when deriving seeds from a root seed.
pub mod stage {
    pub const SYNTH: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const SELECT: u64 = 3;
    pub const FOREST: u64 = 4;
    pub const THIN: u64 = 5;
    pub const QUERIES: u64 = 6;
}
