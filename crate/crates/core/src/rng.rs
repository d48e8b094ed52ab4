//! Seed derivation and per-subsystem random streams.
//!
//! Every scene variant owns one 64-bit seed. Each generation stage draws from
//! its own ChaCha stream keyed by that seed, so adding draws in one stage never
//! shifts the values another stage sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator handed to every sampling routine.
pub type SceneRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed of child `index` from `base`.
///
/// Children of one base are pairwise distinct for distinct indices and do not
/// depend on how many siblings are derived or in which order.
pub fn split(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Named generation stages, each mapped to an independent ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Layout,
    Semantic,
    Small,
    Clutter,
    Light,
    Material,
    Episode,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Layout => 1,
            Stream::Semantic => 2,
            Stream::Small => 3,
            Stream::Clutter => 4,
            Stream::Light => 5,
            Stream::Material => 6,
            Stream::Episode => 7,
        }
    }
}

/// Build the generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: Stream) -> SceneRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}
