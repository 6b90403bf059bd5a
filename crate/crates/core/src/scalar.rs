//! Numeric abstractions shared by every module.
//!
//! [`Scalar`] is the floating-point type models and explainers compute in
//! (`f32` or `f64`). [`Field`] is weaker: anything that can hold a ratio of
//! counts exactly or approximately, which lets the counting metrics and the
//! 0-1 objectives run over [`Rational`] when an exact answer is required.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Exact rational used by the 0-1 objective checks.
pub type Rational = Ratio<i64>;

/// Floating-point scalar for model parameters, features and losses.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Infallible for the shipped float types.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// A number type closed under the four operations, built from counts.
pub trait Field: Clone + PartialOrd + Num + Debug + Send + Sync {
    fn from_count(n: usize) -> Self;
}

impl<T> Field for T
where
    T: Clone + PartialOrd + Num + Debug + FromPrimitive + Send + Sync,
{
    fn from_count(n: usize) -> Self {
        T::from_usize(n).expect("count representable")
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
