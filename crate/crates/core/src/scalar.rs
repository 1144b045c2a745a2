//! Scalar abstraction shared by every numerical module.

use nalgebra as na;
use num_traits as nt;

/// Floating point type the dynamics, LMI layer, SDP engine and simulator are written against.
pub trait Real: na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal is representable in the target scalar type")
}

/// Lossy conversion to `f64` used for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
