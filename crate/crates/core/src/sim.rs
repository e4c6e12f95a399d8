//! Trace generation under the hybrid erasure / binary-symmetric channel.
//!
//! All randomness comes from [`CounterRng`] streams keyed by
//! `(seed, purpose, frame index)`, so each frame is reproducible on its own
//! and the output does not depend on generation order.

use crate::bits::BitVector;
use crate::error::{Error, Result};
use crate::rng::{tags, CounterRng};
use crate::scalar::{is_probability, Real};
use crate::trace::{ChannelParams, FrameRecord, ReceiveStatus, Trace, TraceMeta};

/// Piecewise-constant parameter change starting at `start_frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct Regime<T> {
    pub start_frame: usize,
    pub params: ChannelParams<T>,
    /// RSSI reported for non-erased frames in this regime; `None` keeps the
    /// config-level value.
    pub rssi: Option<i32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub params: ChannelParams<T>,
    pub seed: u64,
    pub n_frames: usize,
    /// Receiver clock rate error in parts per million.
    pub clock_skew_ppm: T,
    pub clock_offset_us: i64,
    /// Uniform receive-timestamp jitter in `[-jitter_us, jitter_us]`.
    pub jitter_us: u64,
    /// RSSI reported for non-erased frames.
    pub rssi: Option<i32>,
    pub drift_schedule: Vec<Regime<T>>,
}

impl<T: Real> SimConfig<T> {
    pub fn new(params: ChannelParams<T>, n_frames: usize, seed: u64) -> Self {
        Self {
            params,
            seed,
            n_frames,
            clock_skew_ppm: T::zero(),
            clock_offset_us: 0,
            jitter_us: 0,
            rssi: None,
            drift_schedule: Vec::new(),
        }
    }

    pub fn with_clock(mut self, skew_ppm: T, offset_us: i64, jitter_us: u64) -> Self {
        self.clock_skew_ppm = skew_ppm;
        self.clock_offset_us = offset_us;
        self.jitter_us = jitter_us;
        self
    }

    pub fn with_rssi(mut self, rssi: i32) -> Self {
        self.rssi = Some(rssi);
        self
    }

    pub fn with_regime(mut self, start_frame: usize, params: ChannelParams<T>, rssi: Option<i32>) -> Self {
        self.drift_schedule.push(Regime {
            start_frame,
            params,
            rssi,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n_frames == 0 {
            return Err(Error::invalid("n_frames must be positive"));
        }
        if !self.clock_skew_ppm.is_finite() || self.clock_skew_ppm <= T::of_f64(-1e6) {
            return Err(Error::invalid("clock skew must be finite and above -1e6 ppm"));
        }
        let mut prev: Option<usize> = None;
        for regime in &self.drift_schedule {
            regime.params.validate()?;
            if prev.is_some_and(|p| regime.start_frame <= p) {
                return Err(Error::invalid("change-point frame indices must be strictly increasing"));
            }
            if regime.start_frame >= self.n_frames {
                return Err(Error::invalid(format!(
                    "change-point at frame {} is beyond n_frames = {}",
                    regime.start_frame, self.n_frames
                )));
            }
            if regime.params.frame_len != self.params.frame_len
                || regime.params.interval_us != self.params.interval_us
            {
                return Err(Error::invalid(
                    "change-points may not alter frame_len or interval_us",
                ));
            }
            prev = Some(regime.start_frame);
        }
        Ok(())
    }

    /// Parameters and RSSI in force for frame `index`.
    pub fn regime_at(&self, index: usize) -> (&ChannelParams<T>, Option<i32>) {
        self.drift_schedule
            .iter()
            .rev()
            .find(|r| r.start_frame <= index)
            .map_or((&self.params, self.rssi), |r| (&r.params, r.rssi.or(self.rssi)))
    }

    fn meta(&self) -> TraceMeta {
        TraceMeta::from_params(
            &self.params,
            format!(
                "simulated r={} s={} p={} seed={}",
                self.params.r, self.params.s, self.params.p, self.seed
            ),
        )
    }
}

fn random_payload(seed: u64, index: u64, len: usize) -> BitVector {
    let mut rng = CounterRng::for_stream(seed, tags::PAYLOAD, index);
    let words = (0..len.div_ceil(64)).map(|_| rng.next_u64()).collect();
    BitVector::from_words(words, len)
}

/// Flips each bit in `start..end` independently with probability `p`.
/// Returns the number of flipped bits.
fn flip_range(payload: &mut BitVector, start: usize, end: usize, p: f64, rng: &mut CounterRng) -> usize {
    if p <= 0.0 || start >= end {
        return 0;
    }
    if p >= 1.0 {
        for i in start..end {
            payload.flip(i);
        }
        return end - start;
    }
    let ln_q = (-p).ln_1p();
    let mut flips = 0;
    let mut pos = start as u64 + rng.geometric_gap(ln_q);
    while pos < end as u64 {
        payload.flip(pos as usize);
        flips += 1;
        pos = pos.saturating_add(1).saturating_add(rng.geometric_gap(ln_q));
    }
    flips
}

/// Transmitted frames: `n_frames` uniform random payloads at `k * interval_us`.
pub fn generate_tx<T: Real>(config: &SimConfig<T>) -> Result<Trace> {
    config.validate()?;
    let len = config.params.frame_len;
    let interval = config.params.interval_us as i64;
    let mut trace = Trace::new(config.meta());
    trace.tx = (0..config.n_frames)
        .map(|k| {
            FrameRecord::tx(
                k as u64,
                k as i64 * interval,
                random_payload(config.seed, k as u64, len),
            )
        })
        .collect();
    Ok(trace)
}

fn check_tx(tx: &Trace, params_len: usize) -> Result<()> {
    if tx.meta.frame_len != params_len {
        return Err(Error::invalid(format!(
            "trace frame_len {} does not match channel frame_len {params_len}",
            tx.meta.frame_len
        )));
    }
    tx.validate()
}

struct ClockMap {
    scale: f64,
    offset_us: i64,
    jitter_us: u64,
    seed: u64,
    prev: Option<i64>,
}

impl ClockMap {
    fn new<T: Real>(config: &SimConfig<T>) -> Self {
        Self {
            scale: 1.0 + config.clock_skew_ppm.as_f64() * 1e-6,
            offset_us: config.clock_offset_us,
            jitter_us: config.jitter_us,
            seed: config.seed,
            prev: None,
        }
    }

    /// Receive timestamp; clamped so rx timestamps never decrease.
    fn map(&mut self, seq: u64, tx_us: i64) -> i64 {
        let jitter = CounterRng::for_stream(self.seed, tags::JITTER, seq).symmetric_i64(self.jitter_us);
        let mut ts = (tx_us as f64 * self.scale).round() as i64 + self.offset_us + jitter;
        if let Some(p) = self.prev {
            ts = ts.max(p);
        }
        self.prev = Some(ts);
        ts
    }
}

/// Per-frame bit corruption applied to corrupted frames.
enum Flipper {
    Symmetric,
    Asymmetric { one_to_zero: f64, zero_to_one: f64 },
}

fn run_channel<T: Real>(tx: &Trace, config: &SimConfig<T>, flipper: Flipper) -> Result<Trace> {
    config.validate()?;
    check_tx(tx, config.params.frame_len)?;
    let mut clock = ClockMap::new(config);
    let mut out = tx.clone();
    out.rx = Vec::with_capacity(tx.tx.len());
    for (k, frame) in tx.tx.iter().enumerate() {
        let seq = frame.seq.expect("validated tx records carry sequence numbers");
        let (params, rssi) = config.regime_at(k);
        let mut outcome = CounterRng::for_stream(config.seed, tags::OUTCOME, seq);
        let timestamp_us = clock.map(seq, frame.timestamp_us);
        let record = if outcome.bernoulli(params.r.as_f64()) {
            FrameRecord {
                seq: Some(seq),
                timestamp_us,
                status: ReceiveStatus::PhyError,
                rssi: None,
                payload: None,
            }
        } else if outcome.bernoulli(params.s.as_f64()) {
            FrameRecord {
                seq: Some(seq),
                timestamp_us,
                status: ReceiveStatus::Ok,
                rssi,
                payload: frame.payload.clone(),
            }
        } else {
            let mut payload = frame.payload.clone().expect("tx payload");
            let mut rng = CounterRng::for_stream(config.seed, tags::FLIPS, seq);
            let len = payload.len();
            match flipper {
                Flipper::Symmetric => {
                    flip_range(&mut payload, 0, len, params.p.as_f64(), &mut rng);
                }
                Flipper::Asymmetric {
                    one_to_zero,
                    zero_to_one,
                } => {
                    let q = one_to_zero.max(zero_to_one);
                    let original = payload.clone();
                    let mut candidates = BitVector::zeros(len);
                    flip_range(&mut candidates, 0, len, q, &mut rng);
                    for i in candidates.ones() {
                        let target = if original.get(i) { one_to_zero } else { zero_to_one };
                        if rng.next_f64() * q < target {
                            payload.flip(i);
                        }
                    }
                }
            }
            FrameRecord {
                seq: Some(seq),
                timestamp_us,
                status: ReceiveStatus::CrcError,
                rssi,
                payload: Some(payload),
            }
        };
        out.rx.push(record);
    }
    Ok(out)
}

/// Passes every transmitted frame through the hybrid channel.
///
/// Each frame independently is erased with probability `r`, otherwise
/// received intact with probability `s`, otherwise received with every bit
/// flipped independently with probability `p`. Receive timestamps are
/// `tx * (1 + skew) + offset + jitter`. The returned trace holds both sides.
pub fn apply_channel<T: Real>(tx: &Trace, config: &SimConfig<T>) -> Result<Trace> {
    run_channel(tx, config, Flipper::Symmetric)
}

/// Like [`apply_channel`] but corrupted frames flip 1s and 0s with different
/// probabilities; `params.p` is ignored.
pub fn apply_asymmetric_channel<T: Real>(
    tx: &Trace,
    config: &SimConfig<T>,
    one_to_zero: T,
    zero_to_one: T,
) -> Result<Trace> {
    if !is_probability(one_to_zero) || !is_probability(zero_to_one) {
        return Err(Error::invalid("flip probabilities must lie in [0, 1]"));
    }
    run_channel(
        tx,
        config,
        Flipper::Asymmetric {
            one_to_zero: one_to_zero.as_f64(),
            zero_to_one: zero_to_one.as_f64(),
        },
    )
}

/// Shape of the periodic within-frame error windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicNoise<T> {
    pub period: usize,
    pub burst_len: usize,
    pub p_in_burst: T,
}

impl<T: Real> PeriodicNoise<T> {
    pub fn new(period: usize, burst_len: usize, p_in_burst: T) -> Self {
        Self {
            period,
            burst_len,
            p_in_burst,
        }
    }

    pub fn in_window(&self, position: usize) -> bool {
        position % self.period < self.burst_len
    }

    fn validate(&self, frame_len: usize) -> Result<()> {
        if self.burst_len == 0 || self.burst_len > self.period || self.period > frame_len {
            return Err(Error::invalid(format!(
                "need 0 < burst_len ({}) <= period ({}) <= frame_len ({frame_len})",
                self.burst_len, self.period
            )));
        }
        if !is_probability(self.p_in_burst) {
            return Err(Error::invalid("p_in_burst must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Corrupts frames only inside windows of `burst_len` bits repeating every
/// `period` bits. Frames with at least one flip are `CrcError`, the rest `Ok`.
/// Timestamps are copied from the tx side; there are no erasures.
pub fn apply_periodic_noise<T: Real>(tx: &Trace, noise: &PeriodicNoise<T>, seed: u64) -> Result<Trace> {
    tx.validate()?;
    let len = tx.meta.frame_len;
    noise.validate(len)?;
    let p = noise.p_in_burst.as_f64();
    let mut out = tx.clone();
    out.rx = tx
        .tx
        .iter()
        .map(|frame| {
            let seq = frame.seq.expect("validated tx records carry sequence numbers");
            let mut rng = CounterRng::for_stream(seed, tags::FLIPS, seq);
            let mut payload = frame.payload.clone().expect("tx payload");
            let mut flips = 0;
            let mut start = 0;
            while start < len {
                flips += flip_range(&mut payload, start, (start + noise.burst_len).min(len), p, &mut rng);
                start += noise.period;
            }
            FrameRecord {
                seq: Some(seq),
                timestamp_us: frame.timestamp_us,
                status: if flips > 0 {
                    ReceiveStatus::CrcError
                } else {
                    ReceiveStatus::Ok
                },
                rssi: None,
                payload: Some(payload),
            }
        })
        .collect();
    Ok(out)
}

/// `generate_tx` followed by `apply_channel`.
pub fn simulate<T: Real>(config: &SimConfig<T>) -> Result<Trace> {
    apply_channel(&generate_tx(config)?, config)
}

/// Copy of `trace` with the sequence numbers of corrupted rx frames removed,
/// as when their headers cannot be trusted.
pub fn hide_corrupted_seqs(trace: &Trace) -> Trace {
    let mut out = trace.clone();
    for f in out.rx.iter_mut().filter(|f| f.is_corrupted()) {
        f.seq = None;
    }
    out
}
