//! Scalar abstraction shared by every solver in the crate.
//!
//! All numerical code is written against [`Real`] so the same kernels run in
//! `f32` (cheap previews, memory-bound runs) and `f64` (validation, production).

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::num::ParseFloatError;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar accepted by the solvers.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + FromStr<Err = ParseFloatError>
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in target float")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    /// Lossy conversion back to `f64`, for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Clamps into `[lo, hi]`; NaN maps to `lo`.
    #[inline]
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        if self > hi {
            hi
        } else if self >= lo {
            self
        } else {
            lo
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Cast between scalar types, panicking only on non-representable values.
#[inline]
pub(crate) fn cast<A: Real, B: Real>(x: A) -> B {
    B::from_f64(x.as_f64()).expect("representable float")
}

/// Length of a 2-vector.
#[inline]
pub fn hypot2<T: Real>(x: T, y: T) -> T {
    (x * x + y * y).sqrt()
}
