//! Scalar abstraction shared by the statistics, fitting and capacity code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar used throughout the crate: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    #[inline]
    fn of_f64(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("count is representable in every Real")
    }

    #[inline]
    fn of_i64(v: i64) -> Self {
        Self::from_i64(v).expect("integer is representable in every Real")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::of_f64(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Checks that `v` lies in the closed unit interval.
pub(crate) fn is_probability<T: Real>(v: T) -> bool {
    v >= T::zero() && v <= T::one()
}
