//! Seeded, splittable random streams.
//!
//! Each `(seed, purpose, index)` triple selects an independent ChaCha8 stream,
//! so data generation, initialization and shuffling never share state and can
//! be reproduced separately.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    Data = 1,
    Split = 2,
    Init = 3,
    Shuffle = 4,
    Theory = 5,
    Evaluation = 6,
}

/// Stream index layout: the purpose tag occupies the top byte, `index` the
/// remaining 56 bits.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Rng {
    debug_assert!(index < 1 << 56, "stream index overflows 56 bits");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | (index & ((1 << 56) - 1)));
    rng
}
