//! Generic scalar abstraction for the real-valued parts of the crate.

use num_traits::{Float, FloatConst, FromPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; the anchor for constants and tables
    /// computed in double precision.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Real")
    }

    fn of_u64(x: u64) -> Self {
        Self::from_u64(x).unwrap_or_else(|| Self::of(x as f64))
    }

    fn of_usize(x: usize) -> Self {
        Self::of_u64(x as u64)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

/// Compensated (Kahan) accumulator; keeps long sums at O(eps) error
/// independent of length, which the deterministic reductions rely on.
#[derive(Clone, Copy, Debug)]
pub struct KahanSum<F: Real> {
    sum: F,
    carry: F,
}

impl<F: Real> Default for KahanSum<F> {
    fn default() -> Self {
        KahanSum { sum: F::zero(), carry: F::zero() }
    }
}

impl<F: Real> KahanSum<F> {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: F) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> F {
        self.sum
    }
}
