//! Statistical validation of the i.i.d. bit-flip and frame-outcome hypotheses.

pub mod frames;
pub mod outcome;
pub mod runs;
pub mod segment;
pub mod symmetry;

pub use frames::{
    bit_position_profile, corrupted_frames, frame_error_runs_test, frame_error_vector, frame_rows,
    per_frame_crossover, CorruptedFrame, FrameRow,
};
pub use outcome::{outcome_iid_tests, OutcomeFraction, OutcomeReport};
pub use runs::{runs_test, RunsCounter, RunsStatistic, RunsTest, RunsTestResult, Verdict};
pub use segment::{mean_segment_duration, segment_corrupted_frames, segment_frames, Segment};
pub use symmetry::{symmetry_from_counts, symmetry_report, SymmetryReport};
