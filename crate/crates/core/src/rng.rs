//! Seeded random streams.
//!
//! Every simulated repetition owns three independent streams, each a
//! SplitMix64 generator whose 64-bit state is derived by [`hash64`] from the
//! tuple `(master_seed, radio_id, scenario_id, rep, stream_tag)`:
//!
//! | tag | stream | consumed by |
//! |-----|--------|-------------|
//! | 0   | env    | PU occupancy (`ChannelState` steps) |
//! | 1   | policy | action sampling and observation-set sampling |
//! | 2   | radio  | sensing noise, then frame delivery |
//!
//! SplitMix64 is counter based: state advances by `0x9E3779B97F4A7C15`
//! per draw and the output is the `mix64` finalizer of the new state.
//! Uniform floats use the top 53 bits: `(x >> 11) * 2^-53`. A Bernoulli(p)
//! draw is `uniform < p`. Any language implementing those three rules
//! reproduces the same sequences.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive 64-bit hash of a word tuple.
///
/// `h0 = GOLDEN_GAMMA`, then `h <- mix64(h + GOLDEN_GAMMA + w)` per word.
pub fn hash64(words: &[u64]) -> u64 {
    words.iter().fold(GOLDEN_GAMMA, |h, &w| {
        mix64(h.wrapping_add(GOLDEN_GAMMA).wrapping_add(w))
    })
}

/// Which of the per-repetition streams to derive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Env = 0,
    Policy = 1,
    Radio = 2,
}

/// A seeded random stream.
#[derive(Debug, Clone)]
pub struct Stream(SplitMix64);

impl Stream {
    /// Stream whose generator state is exactly `state`.
    pub fn from_state(state: u64) -> Self {
        Stream(SplitMix64::from_seed(state.to_le_bytes()))
    }

    pub fn derive(master_seed: u64, radio_id: u64, scenario_id: u64, rep: u64, kind: StreamKind) -> Self {
        Self::from_state(hash64(&[master_seed, radio_id, scenario_id, rep, kind as u64]))
    }

    /// The underlying generator, for use with `rand` distributions.
    pub fn rng(&mut self) -> &mut SplitMix64 {
        &mut self.0
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.gen::<u64>()
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `[0, n)` as `floor(uniform * n)`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Index sampled from a probability vector by inverse CDF.
    ///
    /// Falls back to the last index with positive mass when rounding leaves
    /// the cumulative sum just under `u`.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// `k` distinct items drawn uniformly from `pool` (partial Fisher-Yates,
    /// `pool` is permuted in place). Returns the prefix.
    pub fn choose_distinct<'a>(&mut self, pool: &'a mut [usize], k: usize) -> &'a [usize] {
        let n = pool.len();
        let k = k.min(n);
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        &pool[..k]
    }
}
