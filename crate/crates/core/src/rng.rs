//! Keyed random streams.
//!
//! Every stochastic operation in the crate draws from a ChaCha stream
//! addressed by `(seed, purpose tag, indices...)`. Distinct addresses give
//! statistically independent streams, so Monte Carlo trials, per-column
//! noise, and per-timestep training noise can be evaluated in any order —
//! or in parallel — without changing a single drawn value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a, the stream addressing hash.
fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut hash: u64) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    for b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}

/// Deterministic stream id for a purpose tag plus integer coordinates.
pub fn stream_id(tag: &str, parts: &[u64]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    let mut h = fnv1a(tag.bytes(), OFFSET);
    for p in parts {
        h = fnv1a(p.to_le_bytes(), h);
    }
    h
}

/// A ChaCha generator on the stream addressed by `(seed, tag, parts)`.
pub fn keyed_rng(seed: u64, tag: &str, parts: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, parts));
    rng
}

/// Derives a child seed, for handing an independent seed space to a
/// sub-computation (e.g. one Monte Carlo trial).
pub fn derive_seed(seed: u64, tag: &str, parts: &[u64]) -> u64 {
    stream_id(tag, parts) ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
