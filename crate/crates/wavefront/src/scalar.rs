//! Floating-point abstraction used by the closed forms and the low-level
//! numerical kernels.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};

pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}
