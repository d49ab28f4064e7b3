//! Scalar abstraction shared by the step laws, the exact oracle and the
//! estimators.
//!
//! Step-law probabilities and oracle weights are generic over [`Scalar`], so the
//! same code runs with `f64` for simulation and with [`Exact`] (arbitrary
//! precision rationals) for the enumeration oracle.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};

/// Exact rational probability.
pub type Exact = BigRational;

/// Numeric type usable as a probability weight.
pub trait Scalar: Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive {
    /// `1/2`, built from ring operations so rationals stay exact.
    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar")
    }

    /// Lossy view used by samplers and reports.
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact `num/den` rendering, when the type carries one.
    fn as_fraction(&self) -> Option<String> {
        None
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

impl Scalar for Exact {
    fn as_fraction(&self) -> Option<String> {
        Some(if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        })
    }
}

/// Floating-point scalar used by the estimators.
pub trait Real: num_traits::Float + FromPrimitive + Debug {}

impl<F: num_traits::Float + FromPrimitive + Debug> Real for F {}

/// Parses a plain decimal literal such as `0.75` or `1` into an exact rational.
pub fn parse_decimal(text: &str) -> Option<Exact> {
    let text = text.trim();
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse::<BigInt>().ok()?
    };
    let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
    let value = BigRational::new(numer, denom);
    Some(if negative { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_is_exact_for_rationals() {
        assert_eq!(Exact::half(), BigRational::new(1.into(), 2.into()));
        assert_eq!(f64::half(), 0.5);
    }

    #[test]
    fn decimal_parsing() {
        assert_eq!(
            parse_decimal("0.75"),
            Some(BigRational::new(3.into(), 4.into()))
        );
        assert_eq!(parse_decimal("1"), Some(BigRational::one()));
        assert_eq!(
            parse_decimal(".5"),
            Some(BigRational::new(1.into(), 2.into()))
        );
        assert_eq!(
            parse_decimal("-0.25"),
            Some(BigRational::new((-1).into(), 4.into()))
        );
        assert_eq!(parse_decimal("0.6e1"), None);
        assert_eq!(parse_decimal(""), None);
        assert_eq!(parse_decimal("."), None);
    }

    #[test]
    fn fraction_rendering() {
        assert_eq!(
            parse_decimal("0.375").unwrap().as_fraction().as_deref(),
            Some("3/8")
        );
        assert_eq!(
            parse_decimal("2").unwrap().as_fraction().as_deref(),
            Some("2")
        );
        assert_eq!(0.5f64.as_fraction(), None);
    }
}
