//! Scalar abstraction for the closed-form layers.
//!
//! Rates, lineshapes and the frequency-domain oracle are written once over
//! [`Real`] and instantiated for `f64` (the default used everywhere else) and
//! `f32`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the analytical model.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn two() -> Self {
        Self::lit(2.0)
    }

    fn half() -> Self {
        Self::lit(0.5)
    }

    /// Machine epsilon as `f64`, used to scale tolerances per scalar type.
    fn eps_f64() -> f64 {
        Self::epsilon().to_f64().unwrap_or(f64::EPSILON)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts a frequency in Hz to an angular rate in rad/s.
#[inline]
pub fn hz_to_rad<T: Real>(hz: T) -> T {
    hz * T::TAU()
}

/// Converts an angular rate in rad/s to a frequency in Hz.
#[inline]
pub fn rad_to_hz<T: Real>(rad: T) -> T {
    rad / T::TAU()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_factor_is_two_pi() {
        assert_eq!(hz_to_rad(1.0_f64), std::f64::consts::TAU);
        assert_eq!(rad_to_hz(std::f64::consts::TAU), 1.0);
        assert!((hz_to_rad(1.0_f32) - std::f32::consts::TAU).abs() < 1e-7);
    }
}
