//! Scalar abstraction so the numeric core runs at either `f32` or `f64`.

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar usable throughout the crate.
///
/// Everything numeric (environments, networks, masks, metrics) is generic
/// over this trait; concrete aliases live at the crate root.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Name recorded in persisted artifacts so loads can check precision.
    const NAME: &'static str;

    /// Convert a configuration value. Panics on non-representable input,
    /// which for config-range numbers cannot happen.
    fn from_cfg(x: f64) -> Self {
        Self::from_f64(x).expect("config value representable in scalar type")
    }

    /// Lossy widening view used for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Uniform sample in `[0, 1)` from the given RNG.
    fn sample_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
    fn sample_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f32>()
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
    fn sample_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.random::<f64>()
    }
}

/// Clamp a value into `[lo, hi]`.
pub fn clamp<T: Scalar>(x: T, lo: T, hi: T) -> T {
    if x < lo {
        lo
    } else if x > hi {
        hi
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_distinguish_precision() {
        assert_eq!(<f32 as Scalar>::NAME, "f32");
        assert_eq!(<f64 as Scalar>::NAME, "f64");
    }

    #[test]
    fn clamp_bounds() {
        assert_eq!(clamp(1.5f64, 0.0, 1.0), 1.0);
        assert_eq!(clamp(-0.5f64, 0.0, 1.0), 0.0);
        assert_eq!(clamp(0.25f64, 0.0, 1.0), 0.25);
    }
}
