//! Counter-based pseudorandom source.
//!
//! Every stream is identified by a 64-bit key. The n-th output of a stream is
//! the SplitMix64 finalizer applied to `key + (n + 1) * 0x9E3779B97F4A7C15`
//! (all arithmetic wrapping mod 2^64), so any output can be regenerated from
//! `(key, n)` alone in any language:
//!
//! ```text
//! z = key + (n + 1) * 0x9E3779B97F4A7C15
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! Uniform reals are `(out >> 11) * 2^-53`. Bounded integers use Lemire's
//! multiply-shift with rejection. Per-frame streams are keyed with
//! [`stream_key`] so frames can be generated in any order.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of the stream for `(seed, tag, index)`.
pub fn stream_key(seed: u64, tag: u64, index: u64) -> u64 {
    let base = mix64(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(tag.wrapping_add(1))));
    mix64(base ^ mix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// Stream tags used by the simulator and interleaver.
pub mod tags {
    pub const PAYLOAD: u64 = 1;
    pub const OUTCOME: u64 = 2;
    pub const FLIPS: u64 = 3;
    pub const JITTER: u64 = 4;
    pub const PERMUTATION: u64 = 5;
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn for_stream(seed: u64, tag: u64, index: u64) -> Self {
        Self::new(stream_key(seed, tag, index))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`, safe to pass to `ln`.
    #[inline]
    pub fn next_open_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in `[0, bound)`; `bound` must be non-zero.
    pub fn below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mut m = (self.next_u64() as u128) * (bound as u128);
        let mut low = m as u64;
        if low < bound {
            let threshold = bound.wrapping_neg() % bound;
            while low < threshold {
                m = (self.next_u64() as u128) * (bound as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform integer in `[-half_width, half_width]`.
    pub fn symmetric_i64(&mut self, half_width: u64) -> i64 {
        if half_width == 0 {
            return 0;
        }
        self.below(2 * half_width + 1) as i64 - half_width as i64
    }

    /// Number of failures before the next success of a Bernoulli(p) trial
    /// sequence, for `0 < p < 1`.
    #[inline]
    pub fn geometric_gap(&mut self, ln_one_minus_p: f64) -> u64 {
        let g = (self.next_open_f64().ln() / ln_one_minus_p).floor();
        if g >= u64::MAX as f64 {
            u64::MAX
        } else {
            g as u64
        }
    }
}
