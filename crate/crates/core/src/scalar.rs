//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the engines, networks and statistics are generic over: f32 or f64.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Never fails for the supported types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Clamps `v` into `[lo, hi]`; NaN maps to `lo`.
#[inline]
pub fn clamp<S: Scalar>(v: S, lo: S, hi: S) -> S {
    if v.is_nan() || v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}
