//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the library is generic over (`f32` and `f64`).
///
/// Special functions are evaluated in double precision and rounded back,
/// so `f32` users get correctly rounded gamma values.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite conversion")
    }

    /// Euler gamma function.
    fn gamma(self) -> Self {
        Self::lit(statrs::function::gamma::gamma(self.as_f64()))
    }

    /// Euler beta function `B(a, b)`.
    fn beta(self, other: Self) -> Self {
        Self::lit(statrs::function::beta::beta(self.as_f64(), other.as_f64()))
    }

    /// `self^p` with the convention `0^p = +inf` for negative `p`.
    #[inline]
    fn pow_signed(self, p: Self) -> Self {
        if self == Self::zero() && p < Self::zero() {
            Self::infinity()
        } else {
            self.powf(p)
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sum with Neumaier compensation; the summation order is the iteration order.
pub fn compensated_sum<T: Real, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp = comp + ((sum - t) + v);
        } else {
            comp = comp + ((v - t) + sum);
        }
        sum = t;
    }
    sum + comp
}
