//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable as an importance or satisfaction value: `f32` or `f64`.
///
/// Tolerances are per type so that the same algorithms run at single precision
/// without spurious incoherence reports.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Relative tolerance for coherence checks and propagation conflicts.
    const COHERENCE_REL_TOL: f64;
    /// Absolute floor under the relative tolerance.
    const COHERENCE_ABS_TOL: f64;
    /// Absolute tolerance for algebraic-law equality.
    const LAW_TOL: f64;

    /// Converts an `f64` literal. Panics only for non-representable input, which
    /// cannot happen for finite literals.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in a float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Shortest decimal that reads back to the same value of `Self`, as `f64`.
    ///
    /// For `f32` this yields `0.1` rather than `0.10000000149011612`, and
    /// `from_f64` of the result rounds back to the original bits.
    fn to_decimal(self) -> f64 {
        self.to_string().parse().unwrap_or_else(|_| self.as_f64())
    }

    fn coherence_tolerance() -> Tolerance<Self> {
        Tolerance {
            relative: Self::lit(Self::COHERENCE_REL_TOL),
            absolute: Self::lit(Self::COHERENCE_ABS_TOL),
        }
    }

    fn law_tolerance() -> Self {
        Self::lit(Self::LAW_TOL)
    }
}

impl Scalar for f64 {
    const COHERENCE_REL_TOL: f64 = 1e-9;
    const COHERENCE_ABS_TOL: f64 = 1e-12;
    const LAW_TOL: f64 = 1e-12;
}

impl Scalar for f32 {
    const COHERENCE_REL_TOL: f64 = 1e-5;
    const COHERENCE_ABS_TOL: f64 = 1e-6;
    const LAW_TOL: f64 = 1e-6;
}

/// Mixed relative/absolute comparison: `|a - b| <= max(absolute, relative * max(|a|, |b|))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance<T> {
    pub relative: T,
    pub absolute: T,
}

impl<T: Scalar> Tolerance<T> {
    pub fn absolute(absolute: T) -> Self {
        Self {
            relative: T::zero(),
            absolute,
        }
    }

    pub fn allowed(&self, a: T, b: T) -> T {
        let scale = a.abs().max(b.abs());
        self.absolute.max(self.relative * scale)
    }

    pub fn eq(&self, a: T, b: T) -> bool {
        (a - b).abs() <= self.allowed(a, b)
    }
}

impl<T: Scalar> Default for Tolerance<T> {
    fn default() -> Self {
        T::coherence_tolerance()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f32_decimal_is_short() {
        assert_eq!(0.1f32.to_decimal(), 0.1);
        assert_eq!(f32::from_f64(0.1f32.to_decimal()).unwrap(), 0.1f32);
    }

    #[test]
    fn tolerance_has_absolute_floor() {
        let tol = f64::coherence_tolerance();
        assert!(tol.eq(0.0, 5e-13));
        assert!(!tol.eq(0.0, 5e-12));
        assert!(tol.eq(0.75, 0.75 + 5e-10));
        assert!(!tol.eq(0.75, 0.75 + 5e-9));
    }
}
