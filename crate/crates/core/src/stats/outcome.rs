//! Independence of frame outcomes (erased / corrupted / error-free) within
//! the time span of each corrupted-frame segment.

use serde::Serialize;

use crate::bits::BitVector;
use crate::scalar::Real;
use crate::stats::runs::{RunsTest, Verdict};
use crate::stats::segment::Segment;
use crate::trace::{ReceiveStatus, Trace};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeFraction<T> {
    pub outcome: ReceiveStatus,
    /// Frames inside segments whose indicator sequence passed.
    pub passing_frames: usize,
    /// Frames inside segments with a decisive (pass/fail) test.
    pub tested_frames: usize,
    /// Frames inside segments whose test was degenerate or too short.
    pub excluded_frames: usize,
    pub segments_passed: usize,
    pub segments_failed: usize,
    /// `passing_frames / tested_frames`.
    pub fraction: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeReport<T> {
    pub classes: Vec<OutcomeFraction<T>>,
    /// Received frames lying inside some segment span.
    pub covered_frames: usize,
    pub total_frames: usize,
}

impl<T: Real> OutcomeReport<T> {
    pub fn get(&self, outcome: ReceiveStatus) -> &OutcomeFraction<T> {
        self.classes
            .iter()
            .find(|c| c.outcome == outcome)
            .expect("report covers every outcome")
    }
}

/// Runs-tests the 0-1 indicator of each outcome class over every segment's
/// span of received frames and reports the frame-weighted passing fraction.
pub fn outcome_iid_tests<T: Real>(trace: &Trace, segments: &[Segment<T>], test: &RunsTest<T>) -> OutcomeReport<T> {
    let mut classes: Vec<OutcomeFraction<T>> = ReceiveStatus::ALL
        .iter()
        .map(|&outcome| OutcomeFraction {
            outcome,
            passing_frames: 0,
            tested_frames: 0,
            excluded_frames: 0,
            segments_passed: 0,
            segments_failed: 0,
            fraction: None,
        })
        .collect();
    let mut covered = 0;
    for seg in segments {
        let Some(span) = trace.rx.get(seg.first_rx..=seg.last_rx) else {
            continue;
        };
        covered += span.len();
        for class in classes.iter_mut() {
            let indicator: Vec<bool> = span.iter().map(|f| f.status == class.outcome).collect();
            let result = test.test(&BitVector::from_bools(&indicator));
            match result.verdict {
                Verdict::Pass => {
                    class.passing_frames += span.len();
                    class.tested_frames += span.len();
                    class.segments_passed += 1;
                }
                Verdict::Fail => {
                    class.tested_frames += span.len();
                    class.segments_failed += 1;
                }
                Verdict::Degenerate | Verdict::SmallSample => class.excluded_frames += span.len(),
            }
        }
    }
    for class in classes.iter_mut() {
        class.fraction = (class.tested_frames > 0)
            .then(|| T::of_usize(class.passing_frames) / T::of_usize(class.tested_frames));
    }
    OutcomeReport {
        classes,
        covered_frames: covered,
        total_frames: trace.rx.len(),
    }
}
