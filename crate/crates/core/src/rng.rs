//! Seeded random streams.
//!
//! Every random draw in the crate comes from `ChaCha8Rng` (rand_chacha),
//! seeded with `seed_from_u64` and split into independent streams with
//! `set_stream`. ChaCha output is specified bit-for-bit, so sampled circuits,
//! initial weights and shuffles reproduce across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids used across the crate. Distinct streams of the same seed never
/// overlap.
pub mod stream {
    pub const SHOTS: u64 = 1;
    pub const INIT_SHARED: u64 = 2;
    pub const INIT_QUANTUM: u64 = 3;
    pub const INIT_CLASSICAL_FILTER: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const EPOCH_SHUFFLE: u64 = 6;
    pub const ABLATION: u64 = 7;
}

pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for one epoch's shuffle: the epoch number selects the word position
/// so every epoch gets its own permutation without reseeding games.
pub fn epoch_stream(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = seeded(seed, stream::EPOCH_SHUFFLE);
    rng.set_word_pos(u128::from(epoch) << 40);
    rng
}
