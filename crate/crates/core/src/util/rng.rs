//! Deterministic seed derivation and RNG state capture.
//!
//! Every stochastic component draws from a ChaCha stream whose seed is derived
//! from the experiment seed plus a purpose label, so adding a consumer never
//! perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Derives a child seed from a parent seed, a purpose label, and an index.
/// FNV-1a over the inputs; stable across platforms.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |b: u8| {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    };
    for b in parent.to_le_bytes() {
        eat(b);
    }
    for b in label.as_bytes() {
        eat(*b);
    }
    for b in index.to_le_bytes() {
        eat(b);
    }
    h
}

/// RNG for a derived stream.
pub fn stream(parent: u64, label: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(parent, label, index))
}

/// Full state of a ChaCha stream, capturable and restorable bit-exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(rng: &ChaCha12Rng) -> Self {
        RngState { seed: rng.get_seed(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::from_seed(self.seed);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
