//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the solvers are generic over (`f32`, `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Lossy conversion used for diagnostics and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest tolerance that still means something at this precision.
    #[inline]
    fn tolerance_floor() -> Self {
        Self::epsilon() * Self::lit(100.0)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Rounds to the nearest integer, ties to even.
pub fn round_half_even<T: Real>(x: T) -> T {
    let r = x.round();
    let half = T::lit(0.5);
    if (x - x.trunc()).abs() == half {
        let two = T::lit(2.0);
        // round() moved away from zero; step back if that landed on an odd value
        if (r / two).fract() != T::zero() {
            return r - x.signum();
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_even() {
        assert_eq!(round_half_even(0.5_f64), 0.0);
        assert_eq!(round_half_even(1.5_f64), 2.0);
        assert_eq!(round_half_even(2.5_f64), 2.0);
        assert_eq!(round_half_even(-2.5_f64), -2.0);
        assert_eq!(round_half_even(-3.5_f64), -4.0);
        assert_eq!(round_half_even(2.4999_f64), 2.0);
        assert_eq!(round_half_even(2.6_f32), 3.0);
    }
}
