//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating-point scalar: `f32` or `f64`.
///
/// All walk operators in this crate are real orthogonal matrices, so no complex
/// type is ever needed.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
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
    /// Converts an `f64` literal, rounding to the nearest representable value.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 literal")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in a float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// Default equality tolerance for quantities that should agree up to
    /// rounding: `1e-12` for `f64`, a few hundred ulps for `f32`.
    fn tolerance() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(256.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_tracks_precision() {
        assert_eq!(<f64 as Real>::tolerance(), 1e-12);
        assert!(<f32 as Real>::tolerance() > 1e-6);
    }
}
