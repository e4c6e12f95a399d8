//! Wald–Wolfowitz runs test for two-valued sequences.
//!
//! Under the i.i.d. null the run count is approximately normal with
//! `mu = 2 n1 n0 / N + 1` and `sigma^2 = (mu - 1)(mu - 2) / (N - 1)`.
//! The test is two-sided without continuity correction.

use serde::Serialize;

use crate::bits::BitVector;
use crate::scalar::Real;

/// Sequences shorter than this are reported as [`Verdict::SmallSample`].
pub const MIN_NORMAL_LEN: usize = 20;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// All zeros or all ones; the statistic is undefined.
    Degenerate,
    /// Too short for the normal approximation; neither pass nor fail.
    SmallSample,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Degenerate => "degenerate",
            Verdict::SmallSample => "small_sample",
        }
    }

    /// Whether the verdict is a real accept/reject decision.
    pub fn is_decisive(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::Fail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunsStatistic<T> {
    pub mu: T,
    pub sigma2: T,
    pub z: T,
    pub p_value: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunsTestResult<T> {
    pub n_runs: usize,
    pub n1: usize,
    pub n0: usize,
    /// `None` for degenerate sequences.
    pub statistic: Option<RunsStatistic<T>>,
    pub verdict: Verdict,
}

impl<T: Real> RunsTestResult<T> {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }

    pub fn len(&self) -> usize {
        self.n1 + self.n0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn z(&self) -> Option<T> {
        self.statistic.map(|s| s.z)
    }

    pub fn p_value(&self) -> Option<T> {
        self.statistic.map(|s| s.p_value)
    }
}

/// Running `(runs, n1, n0)` over a sequence fed in pieces.
///
/// Feeding a concatenation piecewise gives exactly the counts of the whole.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunsCounter {
    pub n_runs: usize,
    pub n1: usize,
    pub n0: usize,
    last: Option<bool>,
}

impl RunsCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(bits: &BitVector) -> Self {
        let mut c = Self::new();
        c.push_bits(bits);
        c
    }

    pub fn push(&mut self, bit: bool) {
        if self.last != Some(bit) {
            self.n_runs += 1;
        }
        if bit {
            self.n1 += 1;
        } else {
            self.n0 += 1;
        }
        self.last = Some(bit);
    }

    pub fn push_bits(&mut self, bits: &BitVector) {
        let Some(first) = bits.first() else {
            return;
        };
        let ones = bits.count_ones();
        let mut runs = bits.runs();
        if self.last == Some(first) {
            runs -= 1;
        }
        self.n_runs += runs;
        self.n1 += ones;
        self.n0 += bits.len() - ones;
        self.last = bits.last();
    }

    /// Counts after appending `other`'s sequence to this one.
    pub fn joined(&self, other: &RunsCounter, other_first: Option<bool>) -> RunsCounter {
        let Some(first) = other_first else {
            return *self;
        };
        let merge = usize::from(self.last == Some(first));
        RunsCounter {
            n_runs: self.n_runs + other.n_runs - merge,
            n1: self.n1 + other.n1,
            n0: self.n0 + other.n0,
            last: other.last,
        }
    }

    pub fn len(&self) -> usize {
        self.n1 + self.n0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Extend<bool> for RunsCounter {
    fn extend<I: IntoIterator<Item = bool>>(&mut self, iter: I) {
        for b in iter {
            self.push(b);
        }
    }
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided_p<T: Real>(z: T) -> T {
    let p = statrs::function::erf::erfc(z.abs().as_f64() / std::f64::consts::SQRT_2);
    T::of_f64(p.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunsTest<T> {
    pub alpha: T,
    pub min_len: usize,
}

impl<T: Real> Default for RunsTest<T> {
    fn default() -> Self {
        Self::new(T::of_f64(DEFAULT_ALPHA))
    }
}

impl<T: Real> RunsTest<T> {
    pub fn new(alpha: T) -> Self {
        Self {
            alpha,
            min_len: MIN_NORMAL_LEN,
        }
    }

    pub fn with_min_len(mut self, min_len: usize) -> Self {
        self.min_len = min_len;
        self
    }

    pub fn test(&self, seq: &BitVector) -> RunsTestResult<T> {
        self.from_counter(&RunsCounter::of(seq))
    }

    pub fn from_counter(&self, c: &RunsCounter) -> RunsTestResult<T> {
        self.from_counts(c.n_runs, c.n1, c.n0)
    }

    pub fn from_counts(&self, n_runs: usize, n1: usize, n0: usize) -> RunsTestResult<T> {
        let degenerate = RunsTestResult {
            n_runs,
            n1,
            n0,
            statistic: None,
            verdict: Verdict::Degenerate,
        };
        if n1 == 0 || n0 == 0 {
            return degenerate;
        }
        let n = n1 + n0;
        let (n1t, n0t, nt) = (T::of_usize(n1), T::of_usize(n0), T::of_usize(n));
        let mu = T::two() * n1t * n0t / nt + T::one();
        let sigma2 = (mu - T::one()) * (mu - T::two()) / (nt - T::one());
        if !(sigma2 > T::zero()) {
            return RunsTestResult {
                verdict: Verdict::SmallSample,
                ..degenerate
            };
        }
        let z = (T::of_usize(n_runs) - mu) / sigma2.sqrt();
        let p_value = normal_two_sided_p(z);
        let verdict = if n < self.min_len {
            Verdict::SmallSample
        } else if p_value >= self.alpha {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        RunsTestResult {
            n_runs,
            n1,
            n0,
            statistic: Some(RunsStatistic {
                mu,
                sigma2,
                z,
                p_value,
            }),
            verdict,
        }
    }
}

/// Runs test at significance `alpha` with the default minimum length.
pub fn runs_test<T: Real>(seq: &BitVector, alpha: T) -> RunsTestResult<T> {
    RunsTest::new(alpha).test(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    #[test]
    fn worked_example_sequence() {
        let r = RunsTest::new(0.05).with_min_len(0).test(&bv("1100110111"));
        assert_eq!((r.n_runs, r.n1, r.n0), (5, 7, 3));
        let s = r.statistic.unwrap();
        // mu = 2*7*3/10 + 1, sigma2 = 4.2 * 3.2 / 9
        assert_relative_eq!(s.mu, 5.2, max_relative = 1e-12);
        assert_relative_eq!(s.sigma2, 4.2 * 3.2 / 9.0, max_relative = 1e-12);
        assert!((s.z - (-0.2 / (4.2f64 * 3.2 / 9.0).sqrt())).abs() < 1e-12);
        assert!((s.z + 0.164).abs() < 1e-3);
        assert!(r.passed());
    }

    #[test]
    fn short_sequences_are_small_sample() {
        let r = runs_test(&bv("1100110111"), 0.05);
        assert_eq!(r.verdict, Verdict::SmallSample);
        assert!(r.statistic.is_some());
    }

    #[test]
    fn alternating_sequence_fails() {
        let s: String = (0..100).map(|i| if i % 2 == 0 { '0' } else { '1' }).collect();
        let r = runs_test(&bv(&s), 0.05f64);
        assert_eq!(r.n_runs, 100);
        assert_relative_eq!(r.statistic.unwrap().mu, 51.0, max_relative = 1e-12);
        assert!(r.failed());
    }

    #[test]
    fn constant_sequences_are_degenerate() {
        assert_eq!(runs_test(&BitVector::zeros(100), 0.05f64).verdict, Verdict::Degenerate);
        assert_eq!(
            runs_test(&BitVector::zeros(100).complement(), 0.05f64).verdict,
            Verdict::Degenerate
        );
    }

    #[test]
    fn single_one_has_two_or_three_runs() {
        for pos in [0usize, 17, 99] {
            let mut v = BitVector::zeros(100);
            v.set(pos, true);
            let r = runs_test(&v, 0.05f64);
            assert!(r.verdict != Verdict::Degenerate);
            assert!(matches!(r.n_runs, 2 | 3));
        }
    }

    #[test]
    fn single_precision_agrees() {
        let v = bv("110010111010001011110100101110100010111");
        let a = runs_test(&v, 0.05f64);
        let b = runs_test(&v, 0.05f32);
        assert_eq!(a.verdict, b.verdict);
        assert!((a.z().unwrap() - b.z().unwrap() as f64).abs() < 1e-5);
    }

    #[test]
    fn p_value_reference_points() {
        assert!((normal_two_sided_p(1.959963984540054f64) - 0.05).abs() < 1e-10);
        assert_eq!(normal_two_sided_p(0.0f64), 1.0);
    }

    proptest! {
        #[test]
        fn formulas_hold_for_counts(bits in proptest::collection::vec(any::<bool>(), 2..400)) {
            let v = BitVector::from_bools(&bits);
            let r = runs_test(&v, 0.05f64);
            if let Some(s) = r.statistic {
                let n = (r.n1 + r.n0) as f64;
                let mu = 2.0 * r.n1 as f64 * r.n0 as f64 / n + 1.0;
                prop_assert!((s.mu - mu).abs() <= 1e-12 * mu);
                let sigma2 = (mu - 1.0) * (mu - 2.0) / (n - 1.0);
                prop_assert!((s.sigma2 - sigma2).abs() <= 1e-12 * sigma2.abs());
                prop_assert_eq!(r.verdict == Verdict::Pass, r.len() >= MIN_NORMAL_LEN && s.p_value >= 0.05);
            }
        }

        #[test]
        fn complement_symmetry(bits in proptest::collection::vec(any::<bool>(), 2..400)) {
            let v = BitVector::from_bools(&bits);
            let a = runs_test(&v, 0.05f64);
            let b = runs_test(&v.complement(), 0.05f64);
            prop_assert_eq!(a.n_runs, b.n_runs);
            prop_assert_eq!(a.verdict, b.verdict);
            match (a.statistic, b.statistic) {
                (Some(x), Some(y)) => {
                    prop_assert!((x.mu - y.mu).abs() < 1e-12 * x.mu);
                    prop_assert!((x.sigma2 - y.sigma2).abs() < 1e-12 * x.sigma2.abs().max(1.0));
                    prop_assert!((x.z - y.z).abs() < 1e-9);
                }
                (None, None) => {}
                _ => prop_assert!(false, "statistic presence differs"),
            }
        }

        #[test]
        fn piecewise_counter_matches_whole(
            pieces in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 0..90), 0..8)
        ) {
            let mut inc = RunsCounter::new();
            let mut joined = RunsCounter::new();
            let mut all = Vec::new();
            for p in &pieces {
                let v = BitVector::from_bools(p);
                inc.push_bits(&v);
                joined = joined.joined(&RunsCounter::of(&v), v.first());
                all.extend_from_slice(p);
            }
            let mut bitwise = RunsCounter::new();
            bitwise.extend(all.iter().copied());
            prop_assert_eq!(inc, bitwise);
            prop_assert_eq!(joined, bitwise);
        }
    }
}
