//! Counter-addressed Gaussian draws.
//!
//! Every draw is a pure function of `(seed, stream, index)`. The ChaCha
//! block function is used as the keyed permutation: the seed keys the
//! cipher, `stream` selects the nonce and `index` selects a fixed word
//! offset, so draws can be produced in any order or in parallel and still
//! come out identical.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Words of keystream consumed per draw (two `u64`s for Box-Muller).
const WORDS_PER_DRAW: u128 = 4;

#[derive(Debug, Clone)]
pub struct CounterRng {
    inner: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform draw in the open interval (0, 1).
    pub fn uniform_at(&mut self, index: u64) -> f64 {
        self.inner.set_word_pos(index as u128 * WORDS_PER_DRAW);
        open_unit(self.inner.next_u64())
    }

    /// Standard normal draw number `index` of this stream.
    pub fn normal_at(&mut self, index: u64) -> f64 {
        self.inner.set_word_pos(index as u128 * WORDS_PER_DRAW);
        let u1 = open_unit(self.inner.next_u64());
        let u2 = open_unit(self.inner.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Convenience wrapper for one-off draws.
pub fn normal(seed: u64, stream: u64, index: u64) -> f64 {
    CounterRng::new(seed, stream).normal_at(index)
}

fn open_unit(bits: u64) -> f64 {
    // 53 random mantissa bits, shifted by half an ulp so 0 is never produced.
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
