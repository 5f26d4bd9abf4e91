//! Seeded random sub-streams.
//!
//! Every random decision in the pipeline draws from a ChaCha8 generator keyed
//! by `(seed, purpose, a, b)`. Adding a new consumer with a fresh purpose tag
//! never shifts the draws seen by existing consumers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in stream headers; bump when derivation changes.
pub const RNG_VERSION: &str = "chacha8-splitmix64-v1";

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn purpose_tag(purpose: &str) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(purpose.as_bytes());
    h.finish()
}

/// Generator for one `(purpose, a, b)` coordinate under `seed`.
pub fn substream(seed: u64, purpose: &str, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    let mixed = [purpose_tag(purpose), a, b];
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        let salt = mixed.get(i).copied().unwrap_or(0x5EED);
        state ^= salt;
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn same_coordinates_same_draws() {
        let mut a = substream(7, "queue", 3, 0);
        let mut b = substream(7, "queue", 3, 0);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn coordinates_are_independent() {
        let base = substream(7, "queue", 3, 0).next_u64();
        assert_ne!(base, substream(8, "queue", 3, 0).next_u64());
        assert_ne!(base, substream(7, "perm", 3, 0).next_u64());
        assert_ne!(base, substream(7, "queue", 4, 0).next_u64());
        assert_ne!(base, substream(7, "queue", 3, 1).next_u64());
    }

    #[test]
    fn frozen_first_draw() {
        // Guards the cross-platform reproducibility contract: a change here
        // invalidates every stream file written so far.
        assert_eq!(substream(1, "perm", 0, 0).next_u64(), 0x185e_4745_b8f0_570d);
    }
}
