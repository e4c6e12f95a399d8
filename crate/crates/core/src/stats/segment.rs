//! Greedy segmentation of corrupted frames into i.i.d. stretches.
//!
//! Starting at the first corrupted frame, each following corrupted frame is
//! appended and the runs test is re-run on the concatenated error sequence.
//! When the test fails, the segment closes before the offending frame, which
//! starts the next segment. Run counts are maintained incrementally across
//! frame boundaries, so the pass is linear in the number of frames.

use serde::Serialize;

use crate::interleave::Interleaver;
use crate::scalar::Real;
use crate::stats::frames::{corrupted_frames, CorruptedFrame};
use crate::stats::runs::{RunsCounter, RunsTest, RunsTestResult};
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment<T> {
    /// Sequence number of the first corrupted frame.
    pub start_frame: u64,
    /// Sequence number of the last corrupted frame (inclusive).
    pub end_frame: u64,
    /// Frames spanned, `end_frame - start_frame + 1`.
    pub n_frames: u64,
    pub n_corrupted: usize,
    /// `(end_frame - start_frame) * interval_us`.
    pub duration_us: u64,
    /// Flipped bits over all bits of the segment's corrupted frames.
    pub pooled_p: T,
    pub n_bits: usize,
    pub n_flips: usize,
    /// Receive-order index of the first and last corrupted frame.
    pub first_rx: usize,
    pub last_rx: usize,
    #[serde(skip)]
    pub test: RunsTestResult<T>,
}

struct Open {
    first: usize,
    last: usize,
    counter: RunsCounter,
    n_corrupted: usize,
}

fn close<T: Real>(frames: &[CorruptedFrame], open: &Open, test: &RunsTest<T>, interval_us: u64) -> Segment<T> {
    let (first, last) = (&frames[open.first], &frames[open.last]);
    let span = last.seq.saturating_sub(first.seq);
    let n_bits = open.counter.len();
    let n_flips = open.counter.n1;
    Segment {
        start_frame: first.seq,
        end_frame: last.seq,
        n_frames: span + 1,
        n_corrupted: open.n_corrupted,
        duration_us: span * interval_us,
        pooled_p: if n_bits == 0 {
            T::zero()
        } else {
            T::of_usize(n_flips) / T::of_usize(n_bits)
        },
        n_bits,
        n_flips,
        first_rx: first.rx_index,
        last_rx: last.rx_index,
        test: test.from_counter(&open.counter),
    }
}

/// Segments an explicit list of corrupted frames in the given order.
pub fn segment_frames<T: Real>(frames: &[CorruptedFrame], test: &RunsTest<T>, interval_us: u64) -> Vec<Segment<T>> {
    let mut segments = Vec::new();
    let mut open: Option<Open> = None;
    for (i, f) in frames.iter().enumerate() {
        let bits = f.errors.bits();
        let own = RunsCounter::of(bits);
        match open.as_mut() {
            None => {
                open = Some(Open {
                    first: i,
                    last: i,
                    counter: own,
                    n_corrupted: 1,
                })
            }
            Some(cur) => {
                let joined = cur.counter.joined(&own, bits.first());
                if test.from_counter(&joined).failed() {
                    segments.push(close(frames, cur, test, interval_us));
                    *cur = Open {
                        first: i,
                        last: i,
                        counter: own,
                        n_corrupted: 1,
                    };
                } else {
                    cur.counter = joined;
                    cur.last = i;
                    cur.n_corrupted += 1;
                }
            }
        }
    }
    if let Some(cur) = open {
        segments.push(close(frames, &cur, test, interval_us));
    }
    segments
}

/// Partitions the trace's corrupted frames into maximal greedy segments whose
/// concatenated error vectors pass the runs test.
pub fn segment_corrupted_frames<T: Real>(
    trace: &Trace,
    test: &RunsTest<T>,
    interleaver: Option<&Interleaver>,
) -> Vec<Segment<T>> {
    let frames = corrupted_frames(trace, interleaver);
    segment_frames(&frames, test, trace.meta.interval_us)
}

/// Mean time spanned by the segments, in seconds: `n_frames * interval_us`
/// averaged over segments. `None` for an empty list.
pub fn mean_segment_duration<T: Real>(segments: &[Segment<T>], interval_us: u64) -> Option<T> {
    if segments.is_empty() {
        return None;
    }
    let total_us: u128 = segments
        .iter()
        .map(|s| s.n_frames as u128 * interval_us as u128)
        .sum();
    Some(T::of_f64(total_us as f64) / T::of_f64(segments.len() as f64 * 1e6))
}
