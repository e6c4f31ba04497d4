//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the simulation state and statistics are generic over.
///
/// Implemented for `f32` and `f64`. Random variates are always drawn in `f64`
/// and narrowed, so a given seed yields the same draws for either width.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        // from_f64 is infallible for the float impls
        Self::from_f64(v).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {}
impl Real for f64 {}
