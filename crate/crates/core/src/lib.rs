//! Simulation and trace analysis for the hybrid binary-symmetric /
//! packet-erasure channel formed by 802.11 frames.
//!
//! Frames are erased (PHY error), received corrupted (CRC error, with
//! independently flipped bits) or received intact. The crate generates frame
//! traces from channel parameters and runs the validation pipeline on
//! simulated or imported traces: interleaving, runs tests, segmentation,
//! flip-rate symmetry, frame-outcome independence, parameter estimation and
//! capacity.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar for the common cases.

pub mod bits;
pub mod capacity;
pub mod cli;
pub mod error;
pub mod format;
pub mod interleave;
pub mod recovery;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod stats;
pub mod trace;

pub use bits::{xor_error_vector, BitVector, ErrorVector};
pub use capacity::{
    binary_entropy, capacity_report, erasure_capacity, estimate_params, hybrid_capacity, CapacityReport, Estimate,
    ParamEstimate, RssiBin,
};
pub use error::{Error, Result};
pub use format::{read_trace, write_trace};
pub use interleave::{deinterleave, interleave, Interleaver, Permutation};
pub use recovery::{fit_clock, recover_sequence, recover_trace, ClockFit, Recovery, RecoveryParams, SequenceRecoverer};
pub use scalar::Real;
pub use sim::{apply_channel, apply_periodic_noise, generate_tx, simulate, PeriodicNoise, SimConfig};
pub use stats::{
    bit_position_profile, frame_error_runs_test, mean_segment_duration, outcome_iid_tests, per_frame_crossover,
    runs_test, segment_corrupted_frames, symmetry_report, RunsTest, RunsTestResult, Segment, SymmetryReport, Verdict,
};
pub use trace::{ChannelParams, FrameRecord, ReceiveStatus, Trace, TraceMeta};

pub type ChannelParamsF64 = ChannelParams<f64>;
pub type ChannelParamsF32 = ChannelParams<f32>;
pub type SimConfigF64 = SimConfig<f64>;
pub type SimConfigF32 = SimConfig<f32>;
pub type RunsTestResultF64 = RunsTestResult<f64>;
pub type RunsTestResultF32 = RunsTestResult<f32>;
pub type SegmentF64 = Segment<f64>;
pub type SymmetryReportF64 = SymmetryReport<f64>;
pub type ClockFitF64 = ClockFit<f64>;
pub type ParamEstimateF64 = ParamEstimate<f64>;
pub type CapacityReportF64 = CapacityReport<f64>;
pub type CapacityReportF32 = CapacityReport<f32>;
