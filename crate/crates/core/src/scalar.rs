//! Scalar abstraction shared by every module.
//!
//! Geometry and calculus are written once against [`Scalar`]. The exact
//! instance is [`BigRational`]; `f64` and `f32` are provided for fast
//! sampling paths where a float answer is all that is needed.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Numeric field used by the piecewise-linear and planar code.
pub trait Scalar:
    Clone + fmt::Debug + fmt::Display + PartialOrd + Num + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Whether arithmetic in this type is exact.
    const EXACT: bool;

    /// Parse a decimal string: integer, `p/q`, or decimal with optional exponent.
    fn parse_repr(s: &str) -> Option<Self>;

    /// Canonical string form, inverse of [`Scalar::parse_repr`].
    fn repr(&self) -> String;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer conversion")
    }

    fn frac(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    fn half() -> Self {
        Self::frac(1, 2)
    }

    /// Convert from another scalar type, exactly when both are exact.
    fn convert<T: Scalar>(v: &T) -> Self {
        if Self::EXACT && T::EXACT {
            Self::parse_repr(&v.repr()).expect("exact scalar round trip")
        } else {
            Self::from_f64(v.to_f64_lossy()).expect("finite float")
        }
    }
}

pub fn max_of<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}

pub fn min_of<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

/// Total order on scalars that never contain NaN.
pub fn cmp<S: Scalar>(a: &S, b: &S) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn parse_repr(s: &str) -> Option<Self> {
        parse_rational(s)
    }

    fn repr(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn parse_repr(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: f64 = n.trim().parse().ok()?;
            let d: f64 = d.trim().parse().ok()?;
            if d == 0.0 {
                return None;
            }
            return Some(n / d);
        }
        s.parse().ok().filter(|v: &f64| v.is_finite())
    }

    fn repr(&self) -> String {
        format!("{self:?}")
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn parse_repr(s: &str) -> Option<Self> {
        f64::parse_repr(s).map(|v| v as f32)
    }

    fn repr(&self) -> String {
        format!("{self:?}")
    }
}

/// Exact parse of `"p/q"`, `"-12"`, `"0.125"`, `"1.5e-3"`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(all);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -value } else { value })
}

/// Shorthand for building exact rationals in code and tests.
pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Exact `base^exp` for small integer bases; `exp` may be negative.
pub fn qpow(base: i64, exp: i32) -> BigRational {
    let b = BigRational::from_integer(BigInt::from(base));
    if exp >= 0 {
        num_traits::pow(b, exp as usize)
    } else {
        BigRational::one() / num_traits::pow(b, (-exp) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        assert_eq!(parse_rational("3/6"), Some(q(1, 2)));
        assert_eq!(parse_rational("-7"), Some(q(-7, 1)));
        assert_eq!(parse_rational("0.125"), Some(q(1, 8)));
        assert_eq!(parse_rational("-1.5e-3"), Some(q(-3, 2000)));
        assert_eq!(parse_rational("2E2"), Some(q(200, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational(""), None);
    }

    #[test]
    fn repr_round_trips() {
        for v in [q(0, 1), q(-5, 3), q(22, 7), qpow(3, -4)] {
            assert_eq!(BigRational::parse_repr(&v.repr()), Some(v));
        }
        assert_eq!(f64::parse_repr("1/4"), Some(0.25));
        assert_eq!(f64::parse_repr(&0.1f64.repr()), Some(0.1));
    }

    #[test]
    fn convert_between_scalars() {
        let x = q(1, 3);
        let f: f64 = Scalar::convert(&x);
        assert!((f - 1.0 / 3.0).abs() < 1e-16);
        let back: BigRational = Scalar::convert(&0.5f64);
        assert_eq!(back, q(1, 2));
    }
}
