//! Numeric scalars used for branch times, lengths and embeddings.
//!
//! Integer and rational scalars compare exactly; `f64` compares with an
//! absolute tolerance supplied by the caller.

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::fmt::{Debug, Display};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Exact rational scalar.
pub type Rational = Ratio<i128>;

/// Default absolute tolerance for real-valued comparisons.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

pub trait Scalar:
    Clone
    + Debug
    + Display
    + PartialOrd
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Zero
    + Send
    + Sync
    + 'static
{
    fn as_f64(&self) -> f64;
    fn from_i64(v: i64) -> Self;
    fn parse_scalar(s: &str) -> Option<Self>;
    fn is_exact() -> bool;

    /// Equality up to `tol` (ignored for exact scalars).
    fn tol_eq(&self, other: &Self, tol: f64) -> bool {
        if Self::is_exact() {
            self == other
        } else {
            (self.as_f64() - other.as_f64()).abs() <= tol
        }
    }

    /// Three-way comparison treating `tol`-close values as equal.
    fn tol_cmp(&self, other: &Self, tol: f64) -> Ordering {
        if self.tol_eq(other, tol) {
            Ordering::Equal
        } else if self < other {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }

    fn abs_diff(&self, other: &Self) -> Self {
        if self >= other {
            self.clone() - other.clone()
        } else {
            other.clone() - self.clone()
        }
    }

    fn min_of(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    fn max_of(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

/// Scalars closed under multiplication and division.
pub trait FieldScalar:
    Scalar + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self> + One
{
    fn from_ratio(num: i64, den: i64) -> Self;
}

impl Scalar for i64 {
    fn as_f64(&self) -> f64 {
        *self as f64
    }
    fn from_i64(v: i64) -> Self {
        v
    }
    fn parse_scalar(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
    fn is_exact() -> bool {
        true
    }
}

impl Scalar for f64 {
    fn as_f64(&self) -> f64 {
        *self
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn parse_scalar(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for Rational {
    fn as_f64(&self) -> f64 {
        self.numer().to_f64().unwrap_or(f64::NAN) / self.denom().to_f64().unwrap_or(f64::NAN)
    }
    fn from_i64(v: i64) -> Self {
        Rational::from_integer(v as i128)
    }
    fn parse_scalar(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
    fn is_exact() -> bool {
        true
    }
    fn abs_diff(&self, other: &Self) -> Self {
        (self - other).abs()
    }
}

impl FieldScalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
}

impl FieldScalar for Rational {
    fn from_ratio(num: i64, den: i64) -> Self {
        Rational::new(num as i128, den as i128)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_applies_only_to_reals() {
        assert!(1.0f64.tol_eq(&(1.0 + 1e-13), DEFAULT_TOLERANCE));
        assert!(!1.0f64.tol_eq(&(1.0 + 1e-9), DEFAULT_TOLERANCE));
        let a = Rational::new(1, 3);
        let b = Rational::new(1, 3) + Rational::new(1, 1_000_000_000_000_000);
        assert!(!a.tol_eq(&b, 1.0));
        assert_eq!(a.tol_cmp(&b, 1.0), Ordering::Less);
    }

    #[test]
    fn rational_parse_and_convert() {
        let r = Rational::parse_scalar("7/4").unwrap();
        assert_eq!(r.as_f64(), 1.75);
        assert_eq!(i64::parse_scalar(" 12 "), Some(12));
    }
}
