//! Parameter estimation and hybrid / erasure channel capacity.
//!
//! The hybrid channel delivers `R (1 - r) (s + (1 - s)(1 - H(p)))` bits per
//! second: error-free frames carry a full payload and corrupted frames carry
//! the capacity of a binary symmetric channel. Discarding corrupted frames
//! leaves the erasure capacity `R (1 - r) s`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{is_probability, Real};
use crate::trace::{ChannelParams, FrameRecord, ReceiveStatus, Trace};

/// `H(p) = -p log2 p - (1 - p) log2 (1 - p)`, with `H(0) = H(1) = 0`.
pub fn binary_entropy<T: Real>(p: T) -> Result<T> {
    if !is_probability(p) {
        return Err(Error::invalid(format!("entropy argument {p} is not in [0, 1]")));
    }
    if p == T::zero() || p == T::one() {
        return Ok(T::zero());
    }
    let q = T::one() - p;
    Ok(-(p * p.log2()) - q * q.log2())
}

fn hybrid_bps<T: Real>(rate: T, r: T, s: T, entropy: T) -> T {
    rate * (T::one() - r) * (s + (T::one() - s) * (T::one() - entropy))
}

pub fn hybrid_capacity<T: Real>(params: &ChannelParams<T>) -> T {
    let h = binary_entropy(params.p).expect("validated crossover probability");
    hybrid_bps(params.rate, params.r, params.s, h)
}

pub fn erasure_capacity<T: Real>(params: &ChannelParams<T>) -> T {
    params.rate * (T::one() - params.r) * params.s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate<T> {
    pub value: T,
    /// Binomial standard error `sqrt(v (1 - v) / n)`.
    pub se: T,
    pub n: usize,
}

impl<T: Real> Estimate<T> {
    fn binomial(successes: usize, n: usize) -> Option<Self> {
        (n > 0).then(|| {
            let value = T::of_usize(successes) / T::of_usize(n);
            Estimate {
                value,
                se: (value * (T::one() - value) / T::of_usize(n)).sqrt(),
                n,
            }
        })
    }

    /// Whether `truth` lies within `k` standard errors of the estimate.
    pub fn covers(&self, truth: T, k: T) -> bool {
        (self.value - truth).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamEstimate<T> {
    pub r_hat: Option<Estimate<T>>,
    pub s_hat: Option<Estimate<T>>,
    /// Pooled crossover over corrupted frames with a known tx payload.
    pub p_hat: Option<Estimate<T>>,
    pub fer_hat: Option<T>,
    pub n_frames: usize,
    pub n_phy: usize,
    pub n_corrupted: usize,
    pub n_ok: usize,
    pub corrupted_bits: usize,
    pub flipped_bits: usize,
}

impl<T: Real> ParamEstimate<T> {
    fn from_frames<'a>(trace: &Trace, frames: impl IntoIterator<Item = &'a FrameRecord>) -> Self {
        let (mut n_phy, mut n_crc, mut n_ok, mut bits, mut flips) = (0, 0, 0, 0, 0);
        for f in frames {
            match f.status {
                ReceiveStatus::PhyError => n_phy += 1,
                ReceiveStatus::Ok => n_ok += 1,
                ReceiveStatus::CrcError => {
                    n_crc += 1;
                    if let Some(ev) = trace.error_vector(f) {
                        bits += ev.len();
                        flips += ev.n_corrupted();
                    }
                }
            }
        }
        let n = n_phy + n_crc + n_ok;
        ParamEstimate {
            r_hat: Estimate::binomial(n_phy, n),
            s_hat: Estimate::binomial(n_ok, n_ok + n_crc),
            p_hat: Estimate::binomial(flips, bits),
            fer_hat: (n > 0).then(|| T::of_usize(n_phy + n_crc) / T::of_usize(n)),
            n_frames: n,
            n_phy,
            n_corrupted: n_crc,
            n_ok,
            corrupted_bits: bits,
            flipped_bits: flips,
        }
    }

    /// Hybrid and erasure capacity implied by the estimates at PHY rate `rate`.
    ///
    /// With no non-erased frames both are zero. A missing `p_hat` counts
    /// corrupted frames as carrying nothing.
    pub fn capacities(&self, rate: T) -> (T, T) {
        let r = self.r_hat.map_or(T::zero(), |e| e.value);
        let Some(s) = self.s_hat.map(|e| e.value) else {
            return (T::zero(), T::zero());
        };
        let h = self
            .p_hat
            .map_or(T::one(), |e| binary_entropy(e.value).expect("estimated probability"));
        (hybrid_bps(rate, r, s, h), rate * (T::one() - r) * s)
    }
}

/// Frequencies of each receive state plus the pooled crossover estimate.
pub fn estimate_params<T: Real>(trace: &Trace) -> Result<ParamEstimate<T>> {
    if trace.rx.is_empty() {
        return Err(Error::invalid("cannot estimate parameters from an empty rx trace"));
    }
    Ok(ParamEstimate::from_frames(trace, &trace.rx))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RssiBin<T> {
    /// Lower edge of the bin.
    pub rssi: i32,
    pub n_frames: usize,
    pub fer: T,
    pub s_hat: T,
    pub p_hat: Option<T>,
    pub hybrid_bps: T,
    pub erasure_bps: T,
    pub gain: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityReport<T> {
    pub rate: T,
    pub estimate: ParamEstimate<T>,
    pub hybrid_bps: T,
    pub erasure_bps: T,
    /// `hybrid_bps / rate`.
    pub hybrid_normalized: T,
    pub erasure_normalized: T,
    /// `hybrid / erasure - 1`; absent when the erasure capacity is zero.
    pub gain: Option<T>,
    /// Present only when some non-erased frame carries an RSSI.
    pub per_rssi_bins: Option<Vec<RssiBin<T>>>,
}

fn gain<T: Real>(hybrid: T, erasure: T) -> Option<T> {
    (erasure > T::zero()).then(|| hybrid / erasure - T::one())
}

/// Global capacity plus per-RSSI-bin capacity. Erased frames carry no RSSI,
/// so bins are computed over non-erased frames only, i.e. with `r = 0`.
pub fn capacity_report<T: Real>(trace: &Trace, rssi_bin_width: i32) -> Result<CapacityReport<T>> {
    if rssi_bin_width <= 0 {
        return Err(Error::invalid("RSSI bin width must be positive"));
    }
    let estimate = estimate_params::<T>(trace)?;
    let rate = T::of_f64(trace.meta.rate);
    let (hybrid, erasure) = estimate.capacities(rate);

    let mut bins: BTreeMap<i32, Vec<&FrameRecord>> = BTreeMap::new();
    for f in trace.rx.iter().filter(|f| f.status != ReceiveStatus::PhyError) {
        if let Some(rssi) = f.rssi {
            bins.entry(rssi.div_euclid(rssi_bin_width) * rssi_bin_width)
                .or_default()
                .push(f);
        }
    }
    let per_rssi_bins = (!bins.is_empty()).then(|| {
        bins.into_iter()
            .map(|(rssi, frames)| {
                let est = ParamEstimate::<T>::from_frames(trace, frames.iter().copied());
                let (h, e) = est.capacities(rate);
                RssiBin {
                    rssi,
                    n_frames: est.n_frames,
                    fer: est.fer_hat.unwrap_or_else(T::zero),
                    s_hat: est.s_hat.map_or(T::zero(), |s| s.value),
                    p_hat: est.p_hat.map(|p| p.value),
                    hybrid_bps: h,
                    erasure_bps: e,
                    gain: gain(h, e),
                }
            })
            .collect()
    });
    Ok(CapacityReport {
        rate,
        hybrid_bps: hybrid,
        erasure_bps: erasure,
        hybrid_normalized: hybrid / rate,
        erasure_normalized: erasure / rate,
        gain: gain(hybrid, erasure),
        estimate,
        per_rssi_bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(r: f64, s: f64, p: f64) -> ChannelParams<f64> {
        ChannelParams::new(r, s, p, 54e6, 8000, 20_000).unwrap()
    }

    #[test]
    fn entropy_reference_points() {
        assert_eq!(binary_entropy(0.0f64).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0f64).unwrap(), 0.0);
        assert_eq!(binary_entropy(0.5f64).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.5f32).unwrap(), 1.0);
        // Evaluated at 50 digits: H(0.11) = 0.4999159...
        assert!((binary_entropy(0.11f64).unwrap() - 0.49992).abs() < 1e-5);
        assert!(binary_entropy(-0.01f64).is_err());
        assert!(binary_entropy(1.5f64).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(hybrid_capacity(&params(0.0, 1.0, 0.2)), 54e6);
        let p = params(0.2, 0.3, 0.5);
        assert_relative_eq!(hybrid_capacity(&p), erasure_capacity(&p), max_relative = 1e-15);
        let c = hybrid_capacity(&params(0.0, 0.0, 0.0018));
        assert!((c - 52.97e6).abs() < 0.02e6, "{c}");
        assert_eq!(erasure_capacity(&params(0.0, 1.0, 0.1)), 54e6);
        assert_eq!(erasure_capacity(&params(0.3, 0.0, 0.1)), 0.0);
        assert_relative_eq!(erasure_capacity(&params(0.05, 0.6, 0.1)), 30.78e6, max_relative = 1e-12);
    }

    #[test]
    fn all_ok_trace_estimates() {
        let t = simulate(&SimConfig::new(params(0.0, 1.0, 0.1), 50, 1)).unwrap();
        let e = estimate_params::<f64>(&t).unwrap();
        assert_eq!(e.r_hat.unwrap().value, 0.0);
        assert_eq!(e.s_hat.unwrap().value, 1.0);
        assert!(e.p_hat.is_none());
        let report = capacity_report::<f64>(&t, 1).unwrap();
        assert_eq!(report.hybrid_bps, 54e6);
        assert!(report.per_rssi_bins.is_none());
    }

    #[test]
    fn empty_rx_is_an_error() {
        let mut t = simulate(&SimConfig::new(params(0.0, 1.0, 0.1), 5, 1)).unwrap();
        t.rx.clear();
        assert!(estimate_params::<f64>(&t).is_err());
    }

    #[test]
    fn fer_identity_on_counts() {
        let t = simulate(&SimConfig::new(params(0.15, 0.6, 0.01), 3000, 2)).unwrap();
        let e = estimate_params::<f64>(&t).unwrap();
        let direct = (e.n_phy + e.n_corrupted) as f64 / e.n_frames as f64;
        assert_eq!(e.fer_hat.unwrap(), direct);
        let identity = 1.0 - (1.0 - e.r_hat.unwrap().value) * e.s_hat.unwrap().value;
        assert!((identity - direct).abs() < 1e-15);
    }

    #[test]
    fn noiseless_corruption_gain_limit() {
        let t = simulate(&SimConfig::new(params(0.1, 0.4, 0.0), 2000, 3)).unwrap();
        let report = capacity_report::<f64>(&t, 1).unwrap();
        let s = report.estimate.s_hat.unwrap().value;
        assert_relative_eq!(report.gain.unwrap(), (1.0 - s) / s, max_relative = 1e-12);
    }

    #[test]
    fn rssi_bins_skip_erasures_and_empty_bins() {
        let cfg = SimConfig::new(params(0.3, 0.3, 0.002), 3000, 4)
            .with_rssi(-80)
            .with_regime(1500, params(0.3, 0.6, 0.002), Some(-62));
        let t = simulate(&cfg).unwrap();
        let report = capacity_report::<f64>(&t, 5).unwrap();
        let bins = report.per_rssi_bins.unwrap();
        assert_eq!(bins.iter().map(|b| b.rssi).collect::<Vec<_>>(), vec![-80, -65]);
        let non_erased = t.rx.iter().filter(|f| f.status != ReceiveStatus::PhyError).count();
        assert_eq!(bins.iter().map(|b| b.n_frames).sum::<usize>(), non_erased);
        for b in &bins {
            assert_relative_eq!(b.fer, 1.0 - b.s_hat, max_relative = 1e-12);
            assert!(b.hybrid_bps >= b.erasure_bps);
        }
        assert!(bins[0].gain.unwrap() > 1.0);
        assert!(capacity_report::<f64>(&t, 0).is_err());
    }

    fn cap(r: f64, s: f64, p: f64) -> f64 {
        hybrid_capacity(&params(r, s, p))
    }

    proptest! {
        #[test]
        fn hybrid_dominates_erasure(r in 0.0..=1.0f64, s in 0.0..=1.0f64, p in 0.0..=1.0f64) {
            let c = params(r, s, p);
            let (h, e) = (hybrid_capacity(&c), erasure_capacity(&c));
            prop_assert!(h >= e - 1e-6);
            if (p - 0.5).abs() > 1e-6 && s < 1.0 - 1e-9 && r < 1.0 - 1e-9 {
                prop_assert!(h > e);
            }
        }

        #[test]
        fn monotone_in_each_parameter(r in 0.0..1.0f64, s in 0.0..1.0f64, p in 0.0..0.5f64, d in 0.0..0.5f64) {
            prop_assert!(cap((r + d).min(1.0), s, p) <= cap(r, s, p) + 1e-6);
            prop_assert!(cap(r, (s + d).min(1.0), p) >= cap(r, s, p) - 1e-6);
            prop_assert!(cap(r, s, (p + d).min(0.5)) <= cap(r, s, p) + 1e-6);
        }

        #[test]
        fn entropy_is_symmetric(p in 0.0..=1.0f64) {
            let a = binary_entropy(p).unwrap();
            let b = binary_entropy(1.0 - p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
