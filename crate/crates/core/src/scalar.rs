//! Floating-point scalar abstraction shared by every engine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_index(i: i64) -> Self {
        Self::from_i64(i).expect("index representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute tolerance used when deciding `V == payoff` at a node, relative to `scale`.
    ///
    /// `2^-40 * scale` for `f64`; widened to a few dozen ulps for narrower types.
    #[inline]
    fn exercise_tolerance(scale: Self) -> Self {
        let floor = Self::lit(2f64.powi(-40));
        let ulps = Self::epsilon() * Self::lit(64.0);
        floor.max(ulps) * scale.abs()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_tracks_precision() {
        let t64 = f64::exercise_tolerance(1.0);
        assert_eq!(t64, 2f64.powi(-40));
        let t32 = f32::exercise_tolerance(1.0);
        assert!(t32 > f32::EPSILON);
        assert_eq!(f64::exercise_tolerance(0.0), 0.0);
    }
}
