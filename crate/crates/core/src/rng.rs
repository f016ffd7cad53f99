//! Seeded random streams.
//!
//! Every random draw in the crate comes from xoshiro256++ (Blackman & Vigna),
//! seeded through SplitMix64. A stream is identified by `(seed, stream id)`:
//! the generator state is `seed_from_u64(splitmix64(seed ^ splitmix64(id)))`,
//! so results are identical on every platform.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Prng = Xoshiro256PlusPlus;

/// One SplitMix64 output step (constants from Steele, Lea & Flood).
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, id: u64) -> Prng {
    Prng::seed_from_u64(splitmix64(seed ^ splitmix64(id)))
}

/// The `index`-th member of a family of streams, e.g. one per generated
/// image, so members can be produced independently and in any order.
pub fn substream(seed: u64, id: u64, index: u64) -> Prng {
    Prng::seed_from_u64(splitmix64(splitmix64(seed ^ splitmix64(id)) ^ splitmix64(index)))
}

/// Stream ids used across the crate.
pub mod ids {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const DROPOUT: u64 = 3;
    pub const AUGMENT: u64 = 4;
    pub const FOLDS: u64 = 5;
    pub const PATCHES: u64 = 6;
    pub const WSI: u64 = 7;
    pub const SURVIVAL: u64 = 8;
    pub const BOOTSTRAP: u64 = 9;
}
