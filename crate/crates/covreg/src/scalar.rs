//! Scalar abstraction the numerical core is generic over.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar type (`f32` or `f64`) used throughout the library.
///
/// Everything except the eigendecomposition-backed routines needs only this
/// bound; those additionally require [`nalgebra::RealField`].
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum<Self>
    + for<'a> Sum<&'a Self>
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum<T>
        + for<'a> Sum<&'a T>
        + fmt::Debug
        + fmt::Display
        + fmt::LowerExp
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Cast an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn sf<S: Scalar>(v: f64) -> S {
    S::from_f64(v).expect("constant representable in scalar type")
}

/// Cast a `usize` (dimension, count) into the working scalar type.
#[inline]
pub(crate) fn su<S: Scalar>(v: usize) -> S {
    S::from_usize(v).expect("count representable in scalar type")
}

/// Lossy view of a scalar as `f64`, used for error messages.
#[inline]
pub(crate) fn as_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
