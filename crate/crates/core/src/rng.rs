//! Counter-based random streams.
//!
//! Every random object in a soup is keyed by `(seed, tag, coordinates)`. The
//! key is folded into a ChaCha stream id, so a cell or loop index always sees
//! the same numbers no matter which thread generates it or in which order
//! cells are visited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for. Distinct tags give disjoint streams for the
/// same coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    /// Unit-rate Poisson arrivals of one root site.
    Arrivals = 1,
    /// The coupled walk/bridge pair of one loop index.
    BridgePair = 2,
    /// Duration `T(n, z; m)`.
    Duration = 3,
    /// Root offset `Y(n, z; m)`.
    RootOffset = 4,
    /// Independent layer of loops shorter than 5/8.
    SmallLoops = 5,
    /// Generic Monte Carlo batch.
    Batch = 6,
}

const fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Folds a tag and a list of coordinates into a 64-bit stream id.
pub fn stream_id(tag: StreamTag, coords: &[i64]) -> u64 {
    let mut h = splitmix(tag as u64);
    for &c in coords {
        h = splitmix(h ^ (c as u64));
    }
    h
}

/// Returns the generator for `(seed, tag, coords)`.
pub fn keyed_rng(seed: u64, tag: StreamTag, coords: &[i64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, coords));
    rng
}
