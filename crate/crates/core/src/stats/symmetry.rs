//! Flip-rate comparison between transmitted 1s and 0s.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::trace::Trace;

/// Two-sided 5% critical value of the standard normal.
pub const SYMMETRY_Z_CRITICAL: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport<T> {
    /// Flip rate of transmitted 1s; `None` when no 1s were sent.
    pub mu1: Option<T>,
    /// Sample standard deviation of the 1-flip indicator over `sqrt(n1)`.
    pub se1: Option<T>,
    pub mu0: Option<T>,
    pub se0: Option<T>,
    pub n1: usize,
    pub n0: usize,
    pub flips1: usize,
    pub flips0: usize,
    /// Pooled two-proportion z statistic.
    pub z: Option<T>,
    pub symmetric: Option<bool>,
}

fn rate_and_se<T: Real>(flips: usize, n: usize) -> (Option<T>, Option<T>) {
    if n == 0 {
        return (None, None);
    }
    let mu = T::of_usize(flips) / T::of_usize(n);
    // sample sd = sqrt(n/(n-1) * mu(1-mu)); se = sd / sqrt(n)
    let se = (n > 1).then(|| (mu * (T::one() - mu) / T::of_usize(n - 1)).sqrt());
    (Some(mu), se)
}

/// Builds the report from raw counts.
pub fn symmetry_from_counts<T: Real>(n1: usize, flips1: usize, n0: usize, flips0: usize) -> SymmetryReport<T> {
    let (mu1, se1) = rate_and_se::<T>(flips1, n1);
    let (mu0, se0) = rate_and_se::<T>(flips0, n0);
    let z = match (mu1, mu0) {
        (Some(a), Some(b)) => {
            let pooled = T::of_usize(flips1 + flips0) / T::of_usize(n1 + n0);
            let var = pooled * (T::one() - pooled) * (T::one() / T::of_usize(n1) + T::one() / T::of_usize(n0));
            Some(if var > T::zero() { (a - b) / var.sqrt() } else { T::zero() })
        }
        _ => None,
    };
    SymmetryReport {
        mu1,
        se1,
        mu0,
        se0,
        n1,
        n0,
        flips1,
        flips0,
        z,
        symmetric: z.map(|z| z.abs() < T::of_f64(SYMMETRY_Z_CRITICAL)),
    }
}

/// Counts transmitted 1s and 0s in corrupted frames and how often each flipped.
pub fn symmetry_report<T: Real>(trace: &Trace) -> Result<SymmetryReport<T>> {
    let (mut n1, mut n0, mut flips1, mut flips0) = (0usize, 0usize, 0usize, 0usize);
    let mut frames = 0usize;
    for (_, rx) in trace.corrupted_frames() {
        let (Some(tx_bits), Some(ev)) = (
            rx.seq.and_then(|s| trace.tx_frame(s)).and_then(|f| f.payload.as_ref()),
            trace.error_vector(rx),
        ) else {
            continue;
        };
        frames += 1;
        let ones = tx_bits.count_ones();
        let f1 = tx_bits.count_common_ones(ev.bits())?;
        n1 += ones;
        n0 += tx_bits.len() - ones;
        flips1 += f1;
        flips0 += ev.n_corrupted() - f1;
    }
    if frames == 0 {
        return Err(Error::NoCorruptedFrames);
    }
    Ok(symmetry_from_counts(n1, flips1, n0, flips0))
}
