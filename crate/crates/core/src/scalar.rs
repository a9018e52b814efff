//! Scalar abstraction shared by every numeric module.
//!
//! The score kernels, channel sampling and closed-form analytics are written
//! against [`Real`] so that the same code runs in `f32` (fast scoring) and
//! `f64` (analytics in the low-transmittance regime, where the leakage is a
//! difference of order-one entropies that must resolve 1e-6 effects).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable throughout the crate: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this type.
    #[inline]
    fn cst(x: f64) -> Self {
        // from_f64 is total for f32/f64 (overflow maps to inf).
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).unwrap_or_else(Self::nan)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
