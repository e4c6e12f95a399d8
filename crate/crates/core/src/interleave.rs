//! Whole-frame keyed bit interleaving.
//!
//! The permutation for a key is a Fisher–Yates shuffle of `0..len` driven by
//! the counter RNG keyed with that key: for `i` from `len - 1` down to `1`,
//! swap `perm[i]` with `perm[j]`, `j` uniform in `0..=i`. Interleaving sends
//! input bit `perm[i]` to output position `i`.

use crate::bits::{BitVector, ErrorVector};
use crate::rng::{stream_key, tags, CounterRng};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<u32>,
}

impl Permutation {
    pub fn new(len: usize, key: u64) -> Self {
        assert!(len <= u32::MAX as usize, "frame too long to interleave");
        let mut forward: Vec<u32> = (0..len as u32).collect();
        let mut rng = CounterRng::new(key);
        for i in (1..len).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            forward.swap(i, j);
        }
        Self { forward }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// Source index of output position `i`.
    pub fn source(&self, i: usize) -> usize {
        self.forward[i] as usize
    }

    pub fn apply(&self, bits: &BitVector) -> BitVector {
        assert_eq!(bits.len(), self.len(), "permutation length mismatch");
        let mut out = BitVector::zeros(bits.len());
        for (i, &src) in self.forward.iter().enumerate() {
            if bits.get(src as usize) {
                out.set(i, true);
            }
        }
        out
    }

    pub fn invert(&self, bits: &BitVector) -> BitVector {
        assert_eq!(bits.len(), self.len(), "permutation length mismatch");
        let mut out = BitVector::zeros(bits.len());
        for i in bits.ones() {
            out.set(self.forward[i] as usize, true);
        }
        out
    }
}

pub fn interleave(payload: &BitVector, key: u64) -> BitVector {
    Permutation::new(payload.len(), key).apply(payload)
}

pub fn deinterleave(payload: &BitVector, key: u64) -> BitVector {
    Permutation::new(payload.len(), key).invert(payload)
}

/// Derives distinct per-frame permutation keys from one base key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interleaver {
    pub base_key: u64,
}

impl Interleaver {
    pub const DEFAULT_KEY: u64 = 0x0802_11AB;

    pub fn new(base_key: u64) -> Self {
        Self { base_key }
    }

    pub fn frame_key(&self, seq: u64) -> u64 {
        stream_key(self.base_key, tags::PERMUTATION, seq)
    }

    pub fn interleave_frame(&self, payload: &BitVector, seq: u64) -> BitVector {
        interleave(payload, self.frame_key(seq))
    }

    pub fn deinterleave_frame(&self, payload: &BitVector, seq: u64) -> BitVector {
        deinterleave(payload, self.frame_key(seq))
    }

    /// Maps a channel-order error vector into the MAC (de-interleaved) bit
    /// order seen after the receiver inverts the permutation.
    pub fn deinterleave_errors(&self, ev: &ErrorVector, seq: u64) -> ErrorVector {
        ErrorVector::new(self.deinterleave_frame(ev.bits(), seq))
    }
}

impl Default for Interleaver {
    fn default() -> Self {
        Self::new(Self::DEFAULT_KEY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_bits(len: usize, seed: u64) -> BitVector {
        let mut rng = CounterRng::new(seed);
        let words = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
        BitVector::from_words(words, len)
    }

    #[test]
    fn length_one_is_identity() {
        let v: BitVector = "1".parse().unwrap();
        assert_eq!(interleave(&v, 77), v);
    }

    #[test]
    fn large_frame_round_trip() {
        let x = random_bits(8000, 1);
        let y = interleave(&x, 12345);
        assert_ne!(x, y);
        assert_eq!(deinterleave(&y, 12345), x);
    }

    #[test]
    fn wrong_key_does_not_invert() {
        let x = random_bits(8000, 2);
        for k in 0..20u64 {
            let y = interleave(&x, k);
            assert_ne!(deinterleave(&y, k + 1000), x);
        }
    }

    #[test]
    fn zeros_stay_zero() {
        let z = BitVector::zeros(8000);
        assert_eq!(interleave(&z, 3), z);
        assert_eq!(deinterleave(&z, 3), z);
    }

    #[test]
    fn frame_keys_differ() {
        let il = Interleaver::default();
        assert_ne!(il.frame_key(0), il.frame_key(1));
        assert_ne!(Permutation::new(64, il.frame_key(0)), Permutation::new(64, il.frame_key(1)));
    }

    proptest! {
        #[test]
        fn permutation_is_bijective(len in 1usize..500, key in any::<u64>()) {
            let p = Permutation::new(len, key);
            let mut seen = vec![false; len];
            for i in 0..len {
                prop_assert!(!seen[p.source(i)]);
                seen[p.source(i)] = true;
            }
        }

        #[test]
        fn round_trip_and_popcount(bits in proptest::collection::vec(any::<bool>(), 1..400), key in any::<u64>()) {
            let x = BitVector::from_bools(&bits);
            let y = interleave(&x, key);
            prop_assert_eq!(y.count_ones(), x.count_ones());
            prop_assert_eq!(deinterleave(&y, key), x);
        }
    }
}
