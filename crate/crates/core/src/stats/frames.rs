//! Per-frame error extraction, crossover estimates and bit-position profiles.

use serde::Serialize;

use crate::bits::ErrorVector;
use crate::error::{Error, Result};
use crate::interleave::Interleaver;
use crate::scalar::Real;
use crate::stats::runs::{RunsTest, RunsTestResult};
use crate::trace::{FrameRecord, Trace};

/// A received corrupted frame together with its error vector.
#[derive(Debug, Clone)]
pub struct CorruptedFrame {
    pub rx_index: usize,
    pub seq: u64,
    pub timestamp_us: i64,
    pub errors: ErrorVector,
}

/// Error vector of `rx`, mapped into de-interleaved order when an
/// interleaver is in use.
pub fn frame_error_vector(trace: &Trace, rx: &FrameRecord, interleaver: Option<&Interleaver>) -> Option<ErrorVector> {
    let ev = trace.error_vector(rx)?;
    Some(match (interleaver, rx.seq) {
        (Some(il), Some(seq)) => il.deinterleave_errors(&ev, seq),
        _ => ev,
    })
}

/// All corrupted rx frames with a known tx counterpart, in receive order.
pub fn corrupted_frames(trace: &Trace, interleaver: Option<&Interleaver>) -> Vec<CorruptedFrame> {
    trace
        .corrupted_frames()
        .filter_map(|(rx_index, f)| {
            Some(CorruptedFrame {
                rx_index,
                seq: f.seq?,
                timestamp_us: f.timestamp_us,
                errors: frame_error_vector(trace, f, interleaver)?,
            })
        })
        .collect()
}

/// Runs test on one corrupted frame's error vector.
pub fn frame_error_runs_test<T: Real>(
    trace: &Trace,
    rx: &FrameRecord,
    test: &RunsTest<T>,
    interleaver: Option<&Interleaver>,
) -> Result<RunsTestResult<T>> {
    if !rx.is_corrupted() || rx.seq.is_none() {
        return Err(Error::invalid(
            "frame runs test needs a CRC-error frame with a known sequence number",
        ));
    }
    let ev = frame_error_vector(trace, rx, interleaver).ok_or_else(|| {
        Error::Invariant(format!("no tx payload for rx seq {:?}", rx.seq))
    })?;
    Ok(test.test(ev.bits()))
}

/// Fraction of corrupted bits in the frame, `n_c / l`.
pub fn per_frame_crossover<T: Real>(ev: &ErrorVector) -> T {
    if ev.is_empty() {
        return T::zero();
    }
    T::of_usize(ev.n_corrupted()) / T::of_usize(ev.len())
}

/// Per-position error frequency across corrupted frames.
pub fn bit_position_profile<T: Real>(trace: &Trace, interleaver: Option<&Interleaver>) -> Result<Vec<T>> {
    let frames = corrupted_frames(trace, interleaver);
    if frames.is_empty() {
        return Err(Error::NoCorruptedFrames);
    }
    let mut counts = vec![0usize; trace.meta.frame_len];
    for f in &frames {
        for i in f.errors.bits().ones() {
            counts[i] += 1;
        }
    }
    let n = T::of_usize(frames.len());
    Ok(counts.into_iter().map(|c| T::of_usize(c) / n).collect())
}

/// One row of the per-frame analysis table.
#[derive(Debug, Clone, Serialize)]
pub struct FrameRow<T> {
    pub seq: u64,
    pub timestamp_us: i64,
    pub n_corrupted: usize,
    pub crossover: T,
    pub n_runs: usize,
    pub z: Option<T>,
    pub p_value: Option<T>,
    pub verdict: &'static str,
}

pub fn frame_rows<T: Real>(frames: &[CorruptedFrame], test: &RunsTest<T>) -> Vec<FrameRow<T>> {
    frames
        .iter()
        .map(|f| {
            let r = test.test(f.errors.bits());
            FrameRow {
                seq: f.seq,
                timestamp_us: f.timestamp_us,
                n_corrupted: f.errors.n_corrupted(),
                crossover: per_frame_crossover(&f.errors),
                n_runs: r.n_runs,
                z: r.z(),
                p_value: r.p_value(),
                verdict: r.verdict.label(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::BitVector;
    use crate::sim::{apply_periodic_noise, generate_tx, simulate, PeriodicNoise, SimConfig};
    use crate::trace::{ChannelParams, ReceiveStatus};

    #[test]
    fn crossover_examples() {
        let ev = |s: &str| ErrorVector::new(s.parse().unwrap());
        assert_eq!(per_frame_crossover::<f64>(&ev("0000")), 0.0);
        assert_eq!(per_frame_crossover::<f64>(&ev("1111")), 1.0);
        let mut bits = BitVector::zeros(8000);
        for i in 0..16 {
            bits.set(i * 500, true);
        }
        assert_eq!(per_frame_crossover::<f64>(&ErrorVector::new(bits)), 0.002);
    }

    #[test]
    fn single_frame_profile_is_its_error_vector() {
        let params = ChannelParams::new(0.0, 0.0, 0.05, 1e6, 200, 1000).unwrap();
        let t = simulate(&SimConfig::new(params, 1, 4)).unwrap();
        let profile: Vec<f64> = bit_position_profile(&t, None).unwrap();
        let ev = t.error_vector(&t.rx[0]).unwrap();
        for (i, v) in profile.iter().enumerate() {
            assert_eq!(*v, if ev.bits().get(i) { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn profile_needs_corrupted_frames() {
        let params = ChannelParams::new(0.0, 1.0, 0.05, 1e6, 200, 1000).unwrap();
        let t = simulate(&SimConfig::new(params, 5, 4)).unwrap();
        assert!(matches!(bit_position_profile::<f64>(&t, None), Err(Error::NoCorruptedFrames)));
    }

    #[test]
    fn runs_test_rejects_wrong_frames() {
        let params = ChannelParams::new(0.0, 1.0, 0.05, 1e6, 200, 1000).unwrap();
        let t = simulate(&SimConfig::new(params, 2, 4)).unwrap();
        assert_eq!(t.rx[0].status, ReceiveStatus::Ok);
        assert!(frame_error_runs_test(&t, &t.rx[0], &RunsTest::new(0.05), None).is_err());
    }

    #[test]
    fn all_zero_error_vector_is_degenerate() {
        let params = ChannelParams::new(0.0, 0.0, 0.0, 1e6, 200, 1000).unwrap();
        let t = simulate(&SimConfig::new(params, 1, 4)).unwrap();
        let r = frame_error_runs_test(&t, &t.rx[0], &RunsTest::new(0.05f64), None).unwrap();
        assert_eq!(r.verdict, crate::stats::Verdict::Degenerate);
    }

    #[test]
    fn uniform_profile_is_flat() {
        // Binomial oracle: each position is corrupted in Binomial(n, p) frames.
        let p: f64 = 0.05;
        let params = ChannelParams::new(0.0, 0.0, p, 1e6, 400, 1000).unwrap();
        let t = simulate(&SimConfig::new(params, 2000, 11)).unwrap();
        let profile: Vec<f64> = bit_position_profile(&t, None).unwrap();
        let se = (p * (1.0 - p) / 2000.0).sqrt();
        let worst = profile.iter().map(|f| ((f - p) / se).abs()).fold(0.0, f64::max);
        assert!(worst < 4.0, "max deviation {worst} standard errors");
    }

    #[test]
    fn periodic_profile_shows_windows() {
        let params = ChannelParams::new(0.0, 1.0, 0.0, 1e6, 8000, 1000).unwrap();
        let tx = generate_tx(&SimConfig::new(params, 300, 12)).unwrap();
        let noise = PeriodicNoise::new(288, 32, 0.05);
        let t = apply_periodic_noise(&tx, &noise, 21).unwrap();
        let profile: Vec<f64> = bit_position_profile(&t, None).unwrap();
        let (mut inside, mut n_in, mut outside, mut n_out) = (0.0, 0, 0.0, 0);
        for (i, f) in profile.iter().enumerate() {
            if noise.in_window(i) {
                inside += f;
                n_in += 1;
            } else {
                outside += f;
                n_out += 1;
            }
        }
        let (mean_in, mean_out) = (inside / n_in as f64, outside / n_out as f64);
        assert!(mean_in >= 5.0 * mean_out && mean_in > 0.04, "{mean_in} vs {mean_out}");

        // After de-interleaving the profile is flat again.
        let il = Interleaver::default();
        let flat: Vec<f64> = bit_position_profile(&t, Some(&il)).unwrap();
        let (mut inside, mut outside) = (0.0, 0.0);
        for (i, f) in flat.iter().enumerate() {
            if noise.in_window(i) {
                inside += f;
            } else {
                outside += f;
            }
        }
        let ratio = (inside / n_in as f64) / (outside / n_out as f64);
        assert!((ratio - 1.0).abs() < 0.2, "{ratio}");
    }
}
