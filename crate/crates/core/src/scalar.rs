//! Values that are either exact rationals or doubles.
//!
//! Arithmetic between two exact values stays exact; anything touching a
//! float promotes to float.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative tolerance used wherever two floating routes are compared.
pub const FLOAT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub enum Scalar {
    Exact(BigRational),
    Float(f64),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(BigRational::one())
    }

    pub fn int(v: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn big(v: BigInt) -> Self {
        Scalar::Exact(BigRational::from_integer(v))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Float(x) => *x == 0.0,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => rational_to_f64(r),
            Scalar::Float(x) => *x,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Float(_) => None,
        }
    }

    /// Converts to the floating representation.
    pub fn to_float(&self) -> Scalar {
        Scalar::Float(self.to_f64())
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Float(x) => Scalar::Float(x.abs()),
        }
    }

    pub fn pow(&self, e: u32) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(num_traits::pow(r.clone(), e as usize)),
            Scalar::Float(x) => Scalar::Float(x.powi(e as i32)),
        }
    }

    /// Square root; exact when the value is the square of a rational.
    pub fn sqrt(&self) -> Scalar {
        match self {
            Scalar::Exact(r) if !r.is_negative() => match exact_sqrt(r) {
                Some(s) => Scalar::Exact(s),
                None => Scalar::Float(rational_to_f64(r).sqrt()),
            },
            other => Scalar::Float(other.to_f64().sqrt()),
        }
    }

    /// Equality: exact for two exact values, relative tolerance otherwise.
    pub fn approx_eq(&self, other: &Scalar, rel_tol: f64) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1.0)
            }
        }
    }

    /// |self − other| as a double; zero for equal exact values.
    pub fn deviation(&self, other: &Scalar) -> f64 {
        (self.clone() - other.clone()).abs().to_f64()
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    match r.to_f64() {
        Some(x) if x.is_finite() => x,
        _ => {
            // numerator or denominator too large for a direct conversion
            let shift = r.numer().bits().max(r.denom().bits()) as i64 - 900;
            let scale = BigInt::one() << shift.max(0) as usize;
            let n = (r.numer() / &scale).to_f64().unwrap_or(f64::NAN);
            let d = (r.denom() / &scale).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

pub(crate) fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    let sqrt_int = |v: &BigInt| {
        let s = v.sqrt();
        (&s * &s == *v).then_some(s)
    };
    Some(BigRational::new(sqrt_int(r.numer())?, sqrt_int(r.denom())?))
}

impl Default for Scalar {
    fn default() -> Self {
        Scalar::zero()
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::int(v)
    }
}

impl From<f64> for Scalar {
    fn from(v: f64) -> Self {
        Scalar::Float(v)
    }
}

impl From<BigRational> for Scalar {
    fn from(v: BigRational) -> Self {
        Scalar::Exact(v)
    }
}

impl From<BigInt> for Scalar {
    fn from(v: BigInt) -> Self {
        Scalar::big(v)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    (a, b) => Scalar::Float(a.to_f64() $op b.to_f64()),
                }
            }
        }

        impl<'a> $trait<&'a Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact(a $op b),
                    (a, b) => Scalar::Float(a.to_f64() $op b.to_f64()),
                }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(a) => Scalar::Exact(-a),
            Scalar::Float(x) => Scalar::Float(-x),
        }
    }
}

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, x| acc + x)
    }
}

impl PartialEq for Scalar {
    fn eq(&self, other: &Scalar) -> bool {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => a == b,
            _ => self.to_f64() == other.to_f64(),
        }
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Scalar::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Scalar::Float(x) => write!(f, "{x:e}"),
        }
    }
}

/// Serializes as `{"value": f64, "exact": "p/q"}`, the exact part only for
/// exact values.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(None)?;
        map.serialize_entry("value", &self.to_f64())?;
        if self.is_exact() {
            map.serialize_entry("exact", &self.to_string())?;
        }
        map.end()
    }
}

/// Accepts integers, fractions (`-9/2`), decimals (`4.5`, `1e-3`, read
/// exactly), `sqrt(x)` and `x^(1/k)`; the last two produce floats unless the
/// root is rational.
impl FromStr for Scalar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scalar> {
        let s = s.trim();
        let bad = || Error::Parse(format!("cannot read number {s:?}"));
        if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
            let v: Scalar = inner.parse()?;
            return Ok(v.sqrt());
        }
        if let Some((base, exp)) = s.split_once('^') {
            let base: Scalar = base.parse()?;
            let exp = exp.trim().trim_start_matches('(').trim_end_matches(')');
            let (p, q) = match exp.split_once('/') {
                Some((p, q)) => (p.trim().parse::<u32>().map_err(|_| bad())?, q.trim().parse::<u32>().map_err(|_| bad())?),
                None => (exp.parse::<u32>().map_err(|_| bad())?, 1),
            };
            if q == 0 {
                return Err(bad());
            }
            let powered = base.pow(p);
            return Ok(match q {
                1 => powered,
                2 => powered.sqrt(),
                _ => Scalar::Float(powered.to_f64().powf(1.0 / q as f64)),
            });
        }
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Scalar::Exact(BigRational::new(n, d)));
        }
        parse_decimal(s).ok_or_else(bad)
    }
}

fn parse_decimal(s: &str) -> Option<Scalar> {
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
    let all: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(all);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(Scalar::Exact(if neg { -r } else { r }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::ratio(1, 6);
        assert_eq!(&a + &b, Scalar::ratio(1, 2));
        assert!((a * b).is_exact());
    }

    #[test]
    fn float_promotes() {
        let x = Scalar::ratio(1, 2) + Scalar::Float(0.25);
        assert!(!x.is_exact());
        assert_eq!(x.to_f64(), 0.75);
    }

    #[test]
    fn parses_number_forms() {
        assert_eq!("9/2".parse::<Scalar>().unwrap(), Scalar::ratio(9, 2));
        assert_eq!("4.5".parse::<Scalar>().unwrap(), Scalar::ratio(9, 2));
        assert_eq!("-0.25".parse::<Scalar>().unwrap(), Scalar::ratio(-1, 4));
        assert_eq!("1e-3".parse::<Scalar>().unwrap(), Scalar::ratio(1, 1000));
        assert_eq!("sqrt(9/4)".parse::<Scalar>().unwrap(), Scalar::ratio(3, 2));
        let r = "3^(1/2)".parse::<Scalar>().unwrap();
        assert!(!r.is_exact());
        assert!((r.to_f64() - 3f64.sqrt()).abs() < 1e-15);
        let c = "3^(1/3)".parse::<Scalar>().unwrap();
        assert!((c.to_f64().powi(3) - 3.0).abs() < 1e-12);
        assert!("abc".parse::<Scalar>().is_err());
        assert!("1/0".parse::<Scalar>().is_err());
    }

    #[test]
    fn sqrt_exact_when_square() {
        assert_eq!(Scalar::ratio(25, 16).sqrt(), Scalar::ratio(5, 4));
        assert!(!Scalar::int(2).sqrt().is_exact());
    }

    #[test]
    fn huge_rationals_convert() {
        let big = BigInt::one() << 2000usize;
        let r = BigRational::new(big.clone() * 3, big * 2);
        assert_eq!(rational_to_f64(&r), 1.5);
    }
}
