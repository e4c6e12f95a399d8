//! Sequence-number recovery for corrupted frames.
//!
//! A corrupted frame's header cannot be trusted, so its transmit sequence
//! number is inferred: fit the receiver clock against the transmitter clock
//! by least squares over nearby error-free frames, map the corrupted frame's
//! receive time back to transmitter time, and pick the nearby transmitted
//! frame whose payload is closest in Hamming distance.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trace::{FrameRecord, ReceiveStatus, Trace};

/// Least-squares line `rx = rate * tx + offset_us`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClockFit<T> {
    pub rate: T,
    pub offset_us: T,
    /// `(tx_time, rx_time)` anchors the line was fitted to.
    pub window: Vec<(i64, i64)>,
    pub residual_rms_us: T,
}

impl<T: Real> ClockFit<T> {
    pub fn rx_at(&self, tx_us: T) -> T {
        self.rate * tx_us + self.offset_us
    }

    pub fn tx_at(&self, rx_us: T) -> T {
        (rx_us - self.offset_us) / self.rate
    }

    /// Ordinary least squares over every pair in `anchors`.
    pub fn fit(anchors: &[(i64, i64)]) -> Result<Self> {
        let usable = anchors.len();
        let Some(&(tx_ref, rx_ref)) = anchors.first() else {
            return Err(Error::InsufficientAnchors(0));
        };
        if anchors.iter().all(|&(t, _)| t == tx_ref) {
            return Err(Error::InsufficientAnchors(usize::from(usable > 0)));
        }
        // Work relative to the first anchor; differences are exact in i64.
        let local: Vec<(T, T)> = anchors
            .iter()
            .map(|&(t, r)| (T::of_i64(t - tx_ref), T::of_i64(r - rx_ref)))
            .collect();
        let n = T::of_usize(local.len());
        let (sx, sy) = local
            .iter()
            .fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let (sxx, sxy) = local.iter().fold((T::zero(), T::zero()), |(a, b), &(x, y)| {
            let dx = x - mx;
            (a + dx * dx, b + dx * (y - my))
        });
        let rate = sxy / sxx;
        if !(rate > T::zero()) {
            return Err(Error::Invariant(format!("fitted clock rate {rate} is not positive")));
        }
        let intercept = my - rate * mx;
        let sse = local.iter().fold(T::zero(), |acc, &(x, y)| {
            let e = y - (intercept + rate * x);
            acc + e * e
        });
        Ok(Self {
            rate,
            offset_us: T::of_i64(rx_ref) + intercept - rate * T::of_i64(tx_ref),
            window: anchors.to_vec(),
            residual_rms_us: (sse / n).sqrt(),
        })
    }
}

/// Indices of the `k` entries of sorted `keys` nearest to `target`.
fn nearest_window(keys: &[i64], target: i64, k: usize) -> std::ops::Range<usize> {
    let k = k.min(keys.len());
    let mut hi = keys.partition_point(|&v| v < target);
    let mut lo = hi;
    while hi - lo < k {
        let take_left = match (lo.checked_sub(1), hi < keys.len()) {
            (Some(l), true) => target - keys[l] <= keys[hi] - target,
            (Some(_), false) => true,
            (None, _) => false,
        };
        if take_left {
            lo -= 1;
        } else {
            hi += 1;
        }
    }
    lo..hi
}

/// Fits the clock over the `window_size` anchors whose receive time is
/// nearest `around_rx_us`.
pub fn fit_clock<T: Real>(anchors: &[(i64, i64)], window_size: usize, around_rx_us: i64) -> Result<ClockFit<T>> {
    if anchors.len() < 2 || window_size < 2 {
        return Err(Error::InsufficientAnchors(anchors.len().min(window_size)));
    }
    let mut sorted = anchors.to_vec();
    sorted.sort_by_key(|&(t, r)| (r, t));
    let keys: Vec<i64> = sorted.iter().map(|&(_, r)| r).collect();
    let range = nearest_window(&keys, around_rx_us, window_size);
    ClockFit::fit(&sorted[range])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecoveryParams<T> {
    pub window_size: usize,
    pub max_candidates: usize,
    /// Largest normalized Hamming distance accepted as a match.
    pub match_threshold: T,
}

impl<T: Real> Default for RecoveryParams<T> {
    fn default() -> Self {
        Self {
            window_size: 50,
            max_candidates: 5,
            match_threshold: T::of_f64(0.4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Unresolved<T> {
    /// Fewer than two usable error-free anchors.
    NoAnchors,
    NoCandidates,
    AboveThreshold { best_distance: T },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Recovery<T> {
    Recovered { seq: u64, distance: T },
    Unresolved(Unresolved<T>),
}

impl<T> Recovery<T> {
    pub fn seq(&self) -> Option<u64> {
        match self {
            Recovery::Recovered { seq, .. } => Some(*seq),
            Recovery::Unresolved(_) => None,
        }
    }
}

/// Recovers many frames against one trace's tx side and anchor set.
#[derive(Debug, Clone)]
pub struct SequenceRecoverer<'a, T> {
    tx: &'a Trace,
    anchors: Vec<(i64, i64)>,
    anchor_rx: Vec<i64>,
    tx_times: Vec<i64>,
    params: RecoveryParams<T>,
}

impl<'a, T: Real> SequenceRecoverer<'a, T> {
    /// `rx_ok` supplies the anchors: error-free frames with known sequence
    /// numbers present on the tx side.
    pub fn new(tx: &'a Trace, rx_ok: &[FrameRecord], params: RecoveryParams<T>) -> Self {
        let mut anchors: Vec<(i64, i64)> = rx_ok
            .iter()
            .filter(|f| f.status == ReceiveStatus::Ok)
            .filter_map(|f| Some((tx.tx_frame(f.seq?)?.timestamp_us, f.timestamp_us)))
            .collect();
        anchors.sort_by_key(|&(t, r)| (r, t));
        let anchor_rx = anchors.iter().map(|&(_, r)| r).collect();
        let tx_times = tx.tx.iter().map(|f| f.timestamp_us).collect();
        Self {
            tx,
            anchors,
            anchor_rx,
            tx_times,
            params,
        }
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors.len()
    }

    pub fn clock_near(&self, rx_us: i64) -> Result<ClockFit<T>> {
        if self.anchors.len() < 2 || self.params.window_size < 2 {
            return Err(Error::InsufficientAnchors(self.anchors.len()));
        }
        let range = nearest_window(&self.anchor_rx, rx_us, self.params.window_size);
        ClockFit::fit(&self.anchors[range])
    }

    pub fn recover(&self, corrupted: &FrameRecord) -> Result<Recovery<T>> {
        if corrupted.status != ReceiveStatus::CrcError {
            return Err(Error::invalid("sequence recovery applies to CRC-error frames"));
        }
        let payload = corrupted
            .payload
            .as_ref()
            .ok_or_else(|| Error::invalid("corrupted frame has no payload"))?;
        let clock = match self.clock_near(corrupted.timestamp_us) {
            Ok(c) => c,
            Err(Error::InsufficientAnchors(_)) => return Ok(Recovery::Unresolved(Unresolved::NoAnchors)),
            Err(e) => return Err(e),
        };
        let predicted = clock.tx_at(T::of_i64(corrupted.timestamp_us));
        if !predicted.is_finite() || self.params.max_candidates == 0 || self.tx_times.is_empty() {
            return Ok(Recovery::Unresolved(Unresolved::NoCandidates));
        }
        let target = predicted.round().to_i64().unwrap_or(i64::MAX);
        let range = nearest_window(&self.tx_times, target, self.params.max_candidates);

        let len = T::of_usize(payload.len());
        let mut best: Option<(T, bool, T, u64)> = None;
        for frame in &self.tx.tx[range] {
            let (Some(seq), Some(bits)) = (frame.seq, frame.payload.as_ref()) else {
                continue;
            };
            let distance = T::of_usize(bits.hamming_distance(payload)?) / len;
            let header_match = corrupted.seq.is_some_and(|h| (h ^ seq).count_ones() <= 2);
            let time_gap = (T::of_i64(frame.timestamp_us) - predicted).abs();
            let better = match best {
                None => true,
                Some((d, h, g, _)) => {
                    distance < d
                        || (distance == d && header_match && !h)
                        || (distance == d && header_match == h && time_gap < g)
                }
            };
            if better {
                best = Some((distance, header_match, time_gap, seq));
            }
        }
        Ok(match best {
            None => Recovery::Unresolved(Unresolved::NoCandidates),
            Some((distance, _, _, seq)) if distance < self.params.match_threshold => {
                Recovery::Recovered { seq, distance }
            }
            Some((best_distance, ..)) => Recovery::Unresolved(Unresolved::AboveThreshold { best_distance }),
        })
    }
}

/// Recovers the transmit sequence number of one corrupted frame.
pub fn recover_sequence<T: Real>(
    corrupted: &FrameRecord,
    rx_ok: &[FrameRecord],
    tx: &Trace,
    params: RecoveryParams<T>,
) -> Result<Recovery<T>> {
    SequenceRecoverer::new(tx, rx_ok, params).recover(corrupted)
}

/// Per-frame outcome of [`recover_trace`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveredFrame<T> {
    pub rx_index: usize,
    pub timestamp_us: i64,
    pub result: Recovery<T>,
}

/// Fills in the sequence number of every corrupted rx frame whose seq is
/// unknown. Unresolved frames keep `seq = None`.
pub fn recover_trace<T: Real>(trace: &Trace, params: RecoveryParams<T>) -> Result<(Trace, Vec<RecoveredFrame<T>>)> {
    let rx_ok: Vec<FrameRecord> = trace
        .rx
        .iter()
        .filter(|f| f.status == ReceiveStatus::Ok && f.seq.is_some())
        .cloned()
        .collect();
    let recoverer = SequenceRecoverer::new(trace, &rx_ok, params);
    let mut out = trace.clone();
    let mut results = Vec::new();
    for (i, f) in trace.rx.iter().enumerate() {
        if f.status != ReceiveStatus::CrcError || f.seq.is_some() {
            continue;
        }
        let result = recoverer.recover(f)?;
        out.rx[i].seq = result.seq();
        results.push(RecoveredFrame {
            rx_index: i,
            timestamp_us: f.timestamp_us,
            result,
        });
    }
    Ok((out, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitVector;
    use crate::rng::CounterRng;
    use crate::sim::{hide_corrupted_seqs, simulate, SimConfig};
    use crate::trace::ChannelParams;
    use approx::assert_relative_eq;

    #[test]
    fn identity_clock() {
        let anchors: Vec<(i64, i64)> = (0..10).map(|k| (k * 1000, k * 1000)).collect();
        let fit: ClockFit<f64> = fit_clock(&anchors, 50, 0).unwrap();
        assert_relative_eq!(fit.rate, 1.0, max_relative = 1e-12);
        assert!(fit.offset_us.abs() < 1e-9);
        assert!(fit.residual_rms_us < 1e-9);
    }

    #[test]
    fn exact_affine_clock() {
        // rx = 1.00005 * tx + 337 at tx = k * 20000
        let anchors: Vec<(i64, i64)> = (0..200).map(|k| (k * 20_000, k * 20_001 + 337)).collect();
        let fit: ClockFit<f64> = fit_clock(&anchors, 200, 2_000_000).unwrap();
        assert_relative_eq!(fit.rate, 1.00005, max_relative = 1e-9);
        assert_relative_eq!(fit.offset_us, 337.0, max_relative = 1e-9);
        let fit32: ClockFit<f32> = fit_clock(&anchors[..20], 20, 0).unwrap();
        assert_relative_eq!(fit32.rate, 1.00005, max_relative = 1e-5);
    }

    #[test]
    fn window_uses_nearest_anchors() {
        // Two regimes; the window around the second must ignore the first.
        let mut anchors: Vec<(i64, i64)> = (0..50).map(|k| (k * 100, k * 100)).collect();
        anchors.extend((50..100).map(|k| (k * 100, 2 * k * 100 - 5000)));
        let fit: ClockFit<f64> = fit_clock(&anchors, 10, 2 * 9000 - 5000).unwrap();
        assert_relative_eq!(fit.rate, 2.0, max_relative = 1e-12);
        assert_eq!(fit.window.len(), 10);
    }

    #[test]
    fn degenerate_anchor_sets() {
        assert!(matches!(fit_clock::<f64>(&[(0, 0)], 50, 0), Err(Error::InsufficientAnchors(_))));
        assert!(matches!(
            fit_clock::<f64>(&[(5, 0), (5, 10), (5, 20)], 50, 0),
            Err(Error::InsufficientAnchors(_))
        ));
    }

    #[test]
    fn jittered_skew_estimate() {
        // Ground truth 50 ppm; +-50 us uniform jitter on 100 anchors, one per 100 ms.
        let mut good = 0;
        for seed in 0..200 {
            let mut rng = CounterRng::new(seed);
            let anchors: Vec<(i64, i64)> = (0..100)
                .map(|k| {
                    let tx = k * 100_000;
                    (tx, (tx as f64 * 1.00005).round() as i64 + 1234 + rng.symmetric_i64(50))
                })
                .collect();
            let fit: ClockFit<f64> = fit_clock(&anchors, 100, 5_000_000).unwrap();
            if ((fit.rate - 1.00005) * 1e6).abs() < 5.0 {
                good += 1;
            }
        }
        assert!(good >= 190, "{good}/200");
    }

    fn recovery_trace(p: f64, skew: f64, offset: i64, frames: usize, seed: u64) -> Trace {
        let params = ChannelParams::new(0.1, 0.5, p, 54e6, 8000, 20_000).unwrap();
        simulate(&SimConfig::new(params, frames, seed).with_clock(skew, offset, 0)).unwrap()
    }

    #[test]
    fn exact_recovery_without_skew() {
        let truth = recovery_trace(0.01, 0.0, 0, 2500, 1);
        let (recovered, results) = recover_trace(&hide_corrupted_seqs(&truth), RecoveryParams::<f64>::default()).unwrap();
        assert!(results.len() >= 1000);
        for r in &results {
            assert_eq!(recovered.rx[r.rx_index].seq, truth.rx[r.rx_index].seq);
        }
    }

    #[test]
    fn recovery_with_skew_and_offset() {
        let truth = recovery_trace(0.05, 100.0, 10_000, 2500, 2);
        let params = RecoveryParams {
            window_size: 50,
            max_candidates: 5,
            match_threshold: 0.4,
        };
        let (recovered, results) = recover_trace(&hide_corrupted_seqs(&truth), params).unwrap();
        let correct = results
            .iter()
            .filter(|r| recovered.rx[r.rx_index].seq == truth.rx[r.rx_index].seq)
            .count();
        assert!(correct as f64 >= 0.99 * results.len() as f64);
    }

    #[test]
    fn unrelated_payload_is_unresolved() {
        let truth = recovery_trace(0.01, 0.0, 0, 200, 3);
        let rx_ok: Vec<FrameRecord> = truth.rx.iter().filter(|f| f.status == ReceiveStatus::Ok).cloned().collect();
        let mut rng = CounterRng::new(777);
        let words = (0..125).map(|_| rng.next_u64()).collect();
        let stranger = FrameRecord {
            seq: None,
            timestamp_us: 100 * 20_000,
            status: ReceiveStatus::CrcError,
            rssi: None,
            payload: Some(BitVector::from_words(words, 8000)),
        };
        match recover_sequence(&stranger, &rx_ok, &truth, RecoveryParams::<f64>::default()).unwrap() {
            Recovery::Unresolved(Unresolved::AboveThreshold { best_distance }) => {
                assert!((best_distance - 0.5).abs() < 0.05)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_anchors_is_unresolved() {
        let params = ChannelParams::new(0.0, 0.0, 0.01, 54e6, 256, 20_000).unwrap();
        let truth = simulate(&SimConfig::new(params, 50, 4)).unwrap();
        let (out, results) = recover_trace(&hide_corrupted_seqs(&truth), RecoveryParams::<f64>::default()).unwrap();
        assert_eq!(results.len(), 50);
        assert!(results.iter().all(|r| r.result == Recovery::Unresolved(Unresolved::NoAnchors)));
        assert!(out.rx.iter().all(|f| f.seq.is_none()));
    }

    #[test]
    fn header_seq_breaks_distance_ties() {
        let mut t = Trace::new(crate::trace::TraceMeta {
            rate: 1e6,
            frame_len: 8,
            interval_us: 1000,
            description: String::new(),
        });
        // Identical payloads at seq 4 and 5 make the distance tie.
        for k in 0..10u64 {
            let bits: BitVector = if k == 4 || k == 5 { "10101010" } else { "00001111" }.parse().unwrap();
            t.tx.push(FrameRecord::tx(k, k as i64 * 1000, bits));
        }
        let ok: Vec<FrameRecord> = [0u64, 1, 8, 9]
            .iter()
            .map(|&k| FrameRecord {
                seq: Some(k),
                timestamp_us: k as i64 * 1000,
                status: ReceiveStatus::Ok,
                rssi: None,
                payload: t.tx[k as usize].payload.clone(),
            })
            .collect();
        let mut corrupted = FrameRecord {
            seq: None,
            timestamp_us: 4400,
            status: ReceiveStatus::CrcError,
            rssi: None,
            payload: Some("10101011".parse().unwrap()),
        };
        let params = RecoveryParams::<f64>::default();
        // Without a header, the time-nearest candidate wins.
        assert_eq!(recover_sequence(&corrupted, &ok, &t, params).unwrap().seq(), Some(4));
        // 53 is two bit flips from 5 and three from 4.
        corrupted.seq = Some(53);
        assert_eq!(recover_sequence(&corrupted, &ok, &t, params).unwrap().seq(), Some(5));
    }

    #[test]
    fn window_two_still_recovers() {
        let truth = recovery_trace(0.01, 50.0, 0, 1500, 9);
        let params = RecoveryParams {
            window_size: 2,
            ..RecoveryParams::<f64>::default()
        };
        let (recovered, results) = recover_trace(&hide_corrupted_seqs(&truth), params).unwrap();
        let correct = results
            .iter()
            .filter(|r| recovered.rx[r.rx_index].seq == truth.rx[r.rx_index].seq)
            .count();
        assert!(correct as f64 > 0.9 * results.len() as f64);
    }
}
