//! Packed bit vectors for payloads and error vectors.
//!
//! Bit `i` lives in word `i / 64` at mask `1 << (63 - i % 64)`, i.e. words are
//! MSB-first. This matches the hex encoding of the trace format, where the
//! most significant bit of the first hex digit is bit 0.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn mask(i: usize) -> u64 {
    1u64 << (63 - (i % 64))
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Builds a vector from packed MSB-first words. Bits past `len` are cleared.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(len.div_ceil(64), 0);
        let mut v = Self { words, len };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= !0u64 << (64 - rem);
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] & mask(i) != 0
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        if value {
            self.words[i / 64] |= mask(i);
        } else {
            self.words[i / 64] &= !mask(i);
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] ^= mask(i);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_zeros(&self) -> usize {
        self.len - self.count_ones()
    }

    pub fn first(&self) -> Option<bool> {
        (!self.is_empty()).then(|| self.get(0))
    }

    pub fn last(&self) -> Option<bool> {
        (!self.is_empty()).then(|| self.get(self.len - 1))
    }

    /// Number of adjacent positions `(i, i + 1)` holding different values.
    pub fn transitions(&self) -> usize {
        if self.len < 2 {
            return 0;
        }
        let mut total = 0usize;
        let n = self.words.len();
        for k in 0..n {
            let w = self.words[k];
            // Pair bit j with bit j + 1; the last bit of the word pairs with
            // the first bit of the next word.
            let next_first = if k + 1 < n { self.words[k + 1] >> 63 } else { 0 };
            let shifted = (w << 1) | next_first;
            let mut diff = w ^ shifted;
            // Only pairs whose right element exists.
            let pairs_in_word = if k + 1 < n {
                64
            } else {
                let rem = self.len - k * 64;
                rem - 1
            };
            if pairs_in_word < 64 {
                diff &= if pairs_in_word == 0 {
                    0
                } else {
                    !0u64 << (64 - pairs_in_word)
                };
            }
            total += diff.count_ones() as usize;
        }
        total
    }

    /// Number of maximal runs of equal values.
    pub fn runs(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.transitions() + 1
        }
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitVector {
            words,
            len: self.len,
        })
    }

    pub fn hamming_distance(&self, other: &BitVector) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Number of positions set in both vectors.
    pub fn count_common_ones(&self, other: &BitVector) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                actual: other.len,
            });
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn complement(&self) -> BitVector {
        let mut v = BitVector {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        v.clear_tail();
        v
    }

    /// Positions of set bits in increasing order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let lz = w.leading_zeros() as usize;
                w &= !(1u64 << (63 - lz));
                Some(k * 64 + lz)
            })
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Appends `other` to the end of `self`.
    pub fn extend(&mut self, other: &BitVector) {
        for i in 0..other.len {
            let bit = other.get(i);
            self.len += 1;
            if self.words.len() * 64 < self.len {
                self.words.push(0);
            }
            if bit {
                self.set(self.len - 1, true);
            }
        }
    }

    /// Lowercase hex, `ceil(len / 4)` digits, trailing pad bits zero.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4);
        let mut out = String::with_capacity(digits);
        for d in 0..digits {
            let word = self.words[d / 16];
            let nibble = (word >> (60 - 4 * (d % 16))) & 0xF;
            out.push(char::from_digit(nibble as u32, 16).expect("nibble < 16"));
        }
        out
    }

    /// Inverse of [`to_hex`](Self::to_hex). Rejects wrong digit counts,
    /// uppercase or non-hex characters, and non-zero pad bits.
    pub fn from_hex(hex: &str, len: usize) -> std::result::Result<Self, String> {
        let digits = len.div_ceil(4);
        if hex.len() != digits {
            return Err(format!(
                "payload has {} hex digits, expected {digits} for {len} bits",
                hex.len()
            ));
        }
        let mut words = vec![0u64; len.div_ceil(64)];
        for (d, c) in hex.bytes().enumerate() {
            let nibble = match c {
                b'0'..=b'9' => c - b'0',
                b'a'..=b'f' => c - b'a' + 10,
                _ => return Err(format!("invalid hex digit {:?}", c as char)),
            } as u64;
            words[d / 16] |= nibble << (60 - 4 * (d % 16));
        }
        let v = Self { words, len };
        let mut cleared = v.clone();
        cleared.clear_tail();
        if cleared != v {
            return Err("non-zero padding bits after payload end".into());
        }
        Ok(v)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitVector(\"{self}\")")
        } else {
            write!(f, "BitVector(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Parses a string of `0`/`1` characters.
impl FromStr for BitVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("not a binary digit: {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BitVector::from_bools(&bits))
    }
}

/// Per-bit corruption indicator of one frame: 1 = corrupted, 0 = correct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorVector(BitVector);

impl ErrorVector {
    pub fn new(bits: BitVector) -> Self {
        Self(bits)
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }

    pub fn into_bits(self) -> BitVector {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_corrupted(&self) -> usize {
        self.0.count_ones()
    }

    /// Applies the error pattern to `payload`, flipping every marked bit.
    pub fn apply(&self, payload: &BitVector) -> Result<BitVector> {
        self.0.xor(payload)
    }
}

/// Marks every position where the two payloads differ.
pub fn xor_error_vector(tx_payload: &BitVector, rx_payload: &BitVector) -> Result<ErrorVector> {
    tx_payload.xor(rx_payload).map(ErrorVector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    #[test]
    fn xor_examples() {
        let e = xor_error_vector(&bv("1010"), &bv("1010")).unwrap();
        assert_eq!(e.bits(), &bv("0000"));
        let e = xor_error_vector(&bv("1111"), &bv("0000")).unwrap();
        assert_eq!(e.bits(), &bv("1111"));
        let e = xor_error_vector(&bv("10110"), &bv("10010")).unwrap();
        assert_eq!(e.bits(), &bv("00100"));
    }

    #[test]
    fn xor_length_mismatch() {
        let err = xor_error_vector(&bv("101"), &bv("1010")).unwrap_err();
        assert!(matches!(
            err,
            Error::LengthMismatch {
                expected: 3,
                actual: 4
            }
        ));
    }

    #[test]
    fn runs_of_ten_bit_sequence() {
        assert_eq!(bv("1100110111").runs(), 5);
        assert_eq!(bv("0").runs(), 1);
        assert_eq!(bv("").runs(), 0);
    }

    #[test]
    fn hex_bit_order() {
        let v = bv("1000000011");
        assert_eq!(v.to_hex(), "80c");
        assert_eq!(BitVector::from_hex("80c", 10).unwrap(), v);
        assert!(BitVector::from_hex("80d", 10).is_err());
        assert!(BitVector::from_hex("80", 10).is_err());
        assert!(BitVector::from_hex("80C", 10).is_err());
    }

    #[test]
    fn ones_positions() {
        let v = bv("0100000000000000000000000000000000000000000000000000000000000000011");
        assert_eq!(v.ones().collect::<Vec<_>>(), vec![1, 65, 66]);
    }

    fn naive_transitions(bits: &[bool]) -> usize {
        bits.windows(2).filter(|w| w[0] != w[1]).count()
    }

    proptest! {
        #[test]
        fn transitions_match_naive(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let v = BitVector::from_bools(&bits);
            prop_assert_eq!(v.transitions(), naive_transitions(&bits));
            prop_assert_eq!(v.count_ones(), bits.iter().filter(|&&b| b).count());
        }

        #[test]
        fn error_vector_recovers_tx(
            pair in (1usize..400).prop_flat_map(|n| (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            ))
        ) {
            let tx = BitVector::from_bools(&pair.0);
            let rx = BitVector::from_bools(&pair.1);
            let ev = xor_error_vector(&tx, &rx).unwrap();
            prop_assert_eq!(ev.apply(&rx).unwrap(), tx);
        }

        #[test]
        fn hex_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let v = BitVector::from_bools(&bits);
            prop_assert_eq!(BitVector::from_hex(&v.to_hex(), v.len()).unwrap(), v);
        }

        #[test]
        fn extend_concatenates(a in proptest::collection::vec(any::<bool>(), 0..150),
                               b in proptest::collection::vec(any::<bool>(), 0..150)) {
            let mut v = BitVector::from_bools(&a);
            v.extend(&BitVector::from_bools(&b));
            let joined: Vec<bool> = a.iter().chain(&b).copied().collect();
            prop_assert_eq!(v, BitVector::from_bools(&joined));
        }
    }
}
