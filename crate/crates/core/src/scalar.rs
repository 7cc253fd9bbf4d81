use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar the model computes over: `f32` or `f64`.
///
/// Default tolerances throughout the crate assume `f64`; `f32` is usable
/// for the smooth operations but not for the tight analysis gates.
pub trait Scalar: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {}

/// Shorthand for lifting an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn s<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("finite f64 constant must convert")
}
