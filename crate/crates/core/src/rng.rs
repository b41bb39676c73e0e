//! Counter-based RNG stream derivation.
//!
//! Every trial of every experiment derives its own ChaCha stream from the
//! triple `(experiment seed, domain tag, trial index)`. Streams are
//! independent of execution order, so trials can run in parallel and still
//! reproduce byte-identically under a fixed experiment seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

/// Experiment-level seed from which all per-trial streams are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Derive the stream for `(domain, index)`.
    ///
    /// `domain` separates the independent random consumers of one experiment
    /// ("trial", "task", "calibration", ...); `index` is the trial counter.
    pub fn stream(self, domain: &str, index: u64) -> ChaCha12Rng {
        let d = fnv1a(domain.as_bytes());
        let mut key = [0u8; 32];
        let mut state = self.0 ^ 0x6a09_e667_f3bc_c908;
        for (slot, salt) in key.chunks_exact_mut(8).zip([d, index, self.0, d ^ index]) {
            state = splitmix64(state ^ salt);
            slot.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha12Rng::from_seed(key)
    }

    /// Sub-seed usable to derive further streams (for nested trial loops).
    pub fn child(self, domain: &str, index: u64) -> Seed {
        let d = fnv1a(domain.as_bytes());
        Seed(splitmix64(splitmix64(self.0 ^ d) ^ index))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
