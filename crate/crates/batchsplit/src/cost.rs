//! Scalar cost values for the split dynamic program.
//!
//! The split DP works in the (min, +) semiring: states hold a cost, edges add
//! a cost, and infeasible states carry an absorbing sentinel. Two scalar
//! types implement the semiring:
//!
//! - `f64`: exact floating-point distances, sentinel `+inf`;
//! - `i64`: distances rounded to the nearest integer (half away from zero),
//!   sentinel `i64::MAX`.
//!
//! The choice of scalar *is* the rounding convention, so a kernel
//! instantiated at `i64` reproduces integer-rounded benchmark conventions
//! while the `f64` instantiation keeps exact geometry. Every arithmetic
//! method must propagate the sentinel: once a state is infeasible no later
//! addition may bring it back to a finite value.

use std::fmt::{Debug, Display};

/// Scalar of the (min, +) semiring used by the split kernels.
///
/// Implementations must satisfy, for finite values `a`, `b`:
/// - `add` is ordinary addition and `INFEASIBLE.add(x) == INFEASIBLE`;
/// - `sub` is ordinary subtraction (callers only subtract finite values);
/// - `from_distance` converts a nonnegative Euclidean distance, applying the
///   type's rounding convention;
/// - `mul_units(u)` scales by a nonnegative integer (used for capacity
///   overload penalties) and propagates the sentinel.
pub trait Cost:
    Copy + PartialOrd + PartialEq + Debug + Display + Send + Sync + 'static
{
    const ZERO: Self;
    /// Absorbing sentinel marking infeasible DP states.
    const INFEASIBLE: Self;

    fn from_distance(d: f64) -> Self;
    /// Finite values convert exactly where representable; the sentinel maps
    /// to `f64::INFINITY`.
    fn to_f64(self) -> f64;
    fn add(self, rhs: Self) -> Self;
    fn sub(self, rhs: Self) -> Self;
    fn mul_units(self, units: u64) -> Self;
    fn is_infeasible(self) -> bool;
}

impl Cost for f64 {
    const ZERO: Self = 0.0;
    const INFEASIBLE: Self = f64::INFINITY;

    #[inline]
    fn from_distance(d: f64) -> Self {
        d
    }

    #[inline]
    fn to_f64(self) -> f64 {
        self
    }

    #[inline]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }

    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }

    #[inline]
    fn mul_units(self, units: u64) -> Self {
        self * units as f64
    }

    #[inline]
    fn is_infeasible(self) -> bool {
        self == f64::INFINITY
    }
}

impl Cost for i64 {
    const ZERO: Self = 0;
    const INFEASIBLE: Self = i64::MAX;

    #[inline]
    fn from_distance(d: f64) -> Self {
        d.round() as i64
    }

    #[inline]
    fn to_f64(self) -> f64 {
        if self == Self::INFEASIBLE {
            f64::INFINITY
        } else {
            self as f64
        }
    }

    #[inline]
    fn add(self, rhs: Self) -> Self {
        if self == Self::INFEASIBLE || rhs == Self::INFEASIBLE {
            Self::INFEASIBLE
        } else {
            self + rhs
        }
    }

    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self - rhs
    }

    #[inline]
    fn mul_units(self, units: u64) -> Self {
        if self == Self::INFEASIBLE {
            Self::INFEASIBLE
        } else {
            self.saturating_mul(units as i64)
        }
    }

    #[inline]
    fn is_infeasible(self) -> bool {
        self == Self::INFEASIBLE
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_rounding_is_half_away_from_zero() {
        assert_eq!(<i64 as Cost>::from_distance(std::f64::consts::SQRT_2), 1);
        assert_eq!(<i64 as Cost>::from_distance(2.5), 3);
        assert_eq!(<i64 as Cost>::from_distance(3.49), 3);
        assert_eq!(<i64 as Cost>::from_distance(0.0), 0);
    }

    #[test]
    fn float_conversion_is_exact() {
        assert_eq!(<f64 as Cost>::from_distance(std::f64::consts::SQRT_2), std::f64::consts::SQRT_2);
    }

    #[test]
    fn sentinel_absorbs_addition() {
        let inf_f = <f64 as Cost>::INFEASIBLE;
        assert!(inf_f.add(3.0).is_infeasible());
        assert!(3.0f64.add(inf_f).is_infeasible());

        let inf_i = <i64 as Cost>::INFEASIBLE;
        assert!(inf_i.add(3).is_infeasible());
        assert!(inf_i.add(-5).is_infeasible());
        assert!(3i64.add(inf_i).is_infeasible());
        assert!(inf_i.mul_units(7).is_infeasible());
    }

    #[test]
    fn finite_arithmetic_matches_plain_operators() {
        assert_eq!(2.5f64.add(0.5), 3.0);
        assert_eq!(2.5f64.sub(0.5), 2.0);
        assert_eq!(3.0f64.mul_units(4), 12.0);
        assert_eq!(7i64.add(-3), 4);
        assert_eq!(7i64.sub(3), 4);
        assert_eq!(3i64.mul_units(4), 12);
    }

    #[test]
    fn sentinel_maps_to_infinity() {
        assert_eq!(<i64 as Cost>::INFEASIBLE.to_f64(), f64::INFINITY);
        assert_eq!(<f64 as Cost>::INFEASIBLE.to_f64(), f64::INFINITY);
    }
}
