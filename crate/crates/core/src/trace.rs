//! Frame and trace data model.

use serde::Serialize;

use crate::bits::{xor_error_vector, BitVector, ErrorVector};
use crate::error::{Error, Result};
use crate::scalar::{is_probability, Real};

/// Parameters of the hybrid erasure / binary-symmetric frame channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelParams<T> {
    /// Probability that a frame is erased (PHY error).
    pub r: T,
    /// Probability that a non-erased frame arrives without error.
    pub s: T,
    /// Bit crossover probability inside corrupted frames.
    pub p: T,
    /// PHY bit rate in bits per second.
    pub rate: T,
    /// Payload length in bits.
    pub frame_len: usize,
    pub interval_us: u64,
}

impl<T: Real> ChannelParams<T> {
    pub fn new(r: T, s: T, p: T, rate: T, frame_len: usize, interval_us: u64) -> Result<Self> {
        let params = Self {
            r,
            s,
            p,
            rate,
            frame_len,
            interval_us,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r", self.r), ("s", self.s), ("p", self.p)] {
            if !is_probability(v) {
                return Err(Error::invalid(format!("{name} = {v} is not in [0, 1]")));
            }
        }
        if !(self.rate > T::zero()) || !self.rate.is_finite() {
            return Err(Error::invalid(format!("rate = {} must be positive", self.rate)));
        }
        if self.frame_len == 0 {
            return Err(Error::invalid("frame_len must be positive"));
        }
        if self.interval_us == 0 {
            return Err(Error::invalid("interval_us must be positive"));
        }
        Ok(())
    }

    /// Same parameters with a different `(r, s, p)` triple.
    pub fn with_probabilities(&self, r: T, s: T, p: T) -> Result<Self> {
        Self::new(r, s, p, self.rate, self.frame_len, self.interval_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ReceiveStatus {
    PhyError,
    CrcError,
    Ok,
}

impl ReceiveStatus {
    pub const ALL: [ReceiveStatus; 3] = [Self::PhyError, Self::CrcError, Self::Ok];

    pub fn token(self) -> &'static str {
        match self {
            Self::PhyError => "phy",
            Self::CrcError => "crc",
            Self::Ok => "ok",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "phy" => Some(Self::PhyError),
            "crc" => Some(Self::CrcError),
            "ok" => Some(Self::Ok),
            _ => None,
        }
    }

    pub fn has_payload(self) -> bool {
        !matches!(self, Self::PhyError)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRecord {
    /// `None` when the sequence number is unknown (damaged header).
    pub seq: Option<u64>,
    pub timestamp_us: i64,
    pub status: ReceiveStatus,
    pub rssi: Option<i32>,
    pub payload: Option<BitVector>,
}

impl FrameRecord {
    pub fn tx(seq: u64, timestamp_us: i64, payload: BitVector) -> Self {
        Self {
            seq: Some(seq),
            timestamp_us,
            status: ReceiveStatus::Ok,
            rssi: None,
            payload: Some(payload),
        }
    }

    pub fn is_corrupted(&self) -> bool {
        self.status == ReceiveStatus::CrcError
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    /// PHY bit rate in bits per second.
    pub rate: f64,
    pub frame_len: usize,
    pub interval_us: u64,
    pub description: String,
}

impl TraceMeta {
    pub fn from_params<T: Real>(params: &ChannelParams<T>, description: impl Into<String>) -> Self {
        Self {
            rate: params.rate.as_f64(),
            frame_len: params.frame_len,
            interval_us: params.interval_us,
            description: description.into(),
        }
    }
}

/// A measurement run: what was sent and what was received.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub tx: Vec<FrameRecord>,
    pub rx: Vec<FrameRecord>,
}

impl Trace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            tx: Vec::new(),
            rx: Vec::new(),
        }
    }

    /// Combines a tx-only trace with an rx-only trace of the same run.
    pub fn merge(tx: Trace, rx: Trace) -> Result<Trace> {
        if tx.meta.frame_len != rx.meta.frame_len || tx.meta.interval_us != rx.meta.interval_us {
            return Err(Error::Invariant(
                "tx and rx traces disagree on frame_len or interval_us".into(),
            ));
        }
        let trace = Trace {
            meta: tx.meta,
            tx: tx.tx,
            rx: rx.rx,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// The transmitted frame with sequence number `seq`.
    pub fn tx_frame(&self, seq: u64) -> Option<&FrameRecord> {
        let frame = self.tx.get(usize::try_from(seq).ok()?)?;
        (frame.seq == Some(seq)).then_some(frame)
    }

    /// Error vector of a received frame, in transmitted bit order.
    ///
    /// `None` if the frame has no payload or no matching tx record.
    pub fn error_vector(&self, rx: &FrameRecord) -> Option<ErrorVector> {
        let rx_payload = rx.payload.as_ref()?;
        let tx_payload = self.tx_frame(rx.seq?)?.payload.as_ref()?;
        xor_error_vector(tx_payload, rx_payload).ok()
    }

    /// Received corrupted frames whose tx counterpart is known, in rx order.
    pub fn corrupted_frames(&self) -> impl Iterator<Item = (usize, &FrameRecord)> {
        self.rx.iter().enumerate().filter(move |(_, f)| {
            f.is_corrupted() && f.seq.and_then(|s| self.tx_frame(s)).is_some()
        })
    }

    pub fn count_status(&self, status: ReceiveStatus) -> usize {
        self.rx.iter().filter(|f| f.status == status).count()
    }

    pub fn validate(&self) -> Result<()> {
        let len = self.meta.frame_len;
        for (side, frames) in [("tx", &self.tx), ("rx", &self.rx)] {
            let mut prev: Option<i64> = None;
            for (i, f) in frames.iter().enumerate() {
                if let Some(p) = prev {
                    if f.timestamp_us < p {
                        return Err(Error::Invariant(format!(
                            "{side} record {i}: timestamp {} decreases from {p}",
                            f.timestamp_us
                        )));
                    }
                }
                prev = Some(f.timestamp_us);
                match (&f.payload, f.status.has_payload()) {
                    (Some(p), true) if p.len() != len => {
                        return Err(Error::Invariant(format!(
                            "{side} record {i}: payload has {} bits, frame_len is {len}",
                            p.len()
                        )))
                    }
                    (None, true) => {
                        return Err(Error::Invariant(format!(
                            "{side} record {i}: {} frame without payload",
                            f.status.token()
                        )))
                    }
                    (Some(_), false) => {
                        return Err(Error::Invariant(format!(
                            "{side} record {i}: phy error frame carries a payload"
                        )))
                    }
                    _ => {}
                }
            }
        }
        for (i, f) in self.tx.iter().enumerate() {
            if f.seq != Some(i as u64) {
                return Err(Error::Invariant(format!(
                    "tx record {i}: sequence numbers must be consecutive from 0"
                )));
            }
        }
        if !self.tx.is_empty() {
            if self.rx.len() > self.tx.len() {
                return Err(Error::Invariant(format!(
                    "{} rx records exceed {} tx records",
                    self.rx.len(),
                    self.tx.len()
                )));
            }
            for (i, f) in self.rx.iter().enumerate() {
                if let Some(seq) = f.seq {
                    if seq as usize >= self.tx.len() {
                        return Err(Error::Invariant(format!(
                            "rx record {i}: seq {seq} has no tx record"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
