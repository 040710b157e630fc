//! Exact rational scalars and the Pochhammer family of products built on them.
//!
//! [`Rational`] wraps an arbitrary-precision `BigRational`, which is kept in
//! lowest terms with a positive denominator after every operation. The text
//! form is `p/q`, or just `p` for integers.

use std::cmp::Ordering;
use std::fmt;
use std::iter::{Product, Sum};
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(BigRational::new(numer.into(), denom.into())))
    }

    pub fn from_integer(n: i64) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }

    pub fn from_big(numer: BigInt, denom: BigInt) -> Result<Self> {
        if denom.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(BigRational::new(numer, denom)))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(self.0.recip()))
    }

    pub fn checked_div(&self, rhs: &Rational) -> Result<Self> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(&self.0 / &rhs.0))
    }

    pub fn pow(&self, exp: u32) -> Self {
        Rational(num_traits::pow(self.0.clone(), exp as usize))
    }

    /// `(-1)^k`.
    pub fn sign_power(k: u32) -> Self {
        if k.is_multiple_of(2) {
            Rational::one()
        } else {
            Rational::from_integer(-1)
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or_else(|| {
            // Ratio::to_f64 gives up when both parts overflow; fall back to a
            // scaled division.
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }

    /// Returns the value as an `i64` if it is an integer that fits.
    pub fn to_i64(&self) -> Option<i64> {
        if self.is_integer() {
            self.numer().to_i64()
        } else {
            None
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid rational {s:?}"));
        let (num, den) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), Some(d.trim())),
            None => (s, None),
        };
        let digits_ok = |t: &str, signed: bool| {
            let body = if signed {
                t.strip_prefix('-').or_else(|| t.strip_prefix('+')).unwrap_or(t)
            } else {
                t
            };
            !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
        };
        if !digits_ok(num, true) {
            return Err(bad());
        }
        let numer: BigInt = num.parse().map_err(|_| bad())?;
        let denom: BigInt = match den {
            Some(d) => {
                if !digits_ok(d, false) {
                    return Err(bad());
                }
                d.parse().map_err(|_| bad())?
            }
            None => BigInt::one(),
        };
        if denom.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        Ok(Rational(BigRational::new(numer, denom)))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Int(i64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Int(n) => Ok(Rational::from_integer(n)),
        }
    }
}

impl From<i64> for Rational {
    fn from(n: i64) -> Self {
        Rational::from_integer(n)
    }
}

impl From<i32> for Rational {
    fn from(n: i32) -> Self {
        Rational::from_integer(n.into())
    }
}

impl From<u32> for Rational {
    fn from(n: u32) -> Self {
        Rational::from_integer(n.into())
    }
}

impl From<BigInt> for Rational {
    fn from(n: BigInt) -> Self {
        Rational(BigRational::from_integer(n))
    }
}

impl From<BigUint> for Rational {
    fn from(n: BigUint) -> Self {
        Rational(BigRational::from_integer(n.into()))
    }
}

macro_rules! forward_binop {
    ($imp:ident, $method:ident, $assign_imp:ident, $assign_method:ident) => {
        impl $imp<&Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($imp::$method(&self.0, &rhs.0))
            }
        }
        impl $imp<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational($imp::$method(self.0, rhs.0))
            }
        }
        impl $imp<&Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &Rational) -> Rational {
                Rational($imp::$method(self.0, &rhs.0))
            }
        }
        impl $imp<Rational> for &Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational($imp::$method(&self.0, rhs.0))
            }
        }
        impl $assign_imp<&Rational> for Rational {
            fn $assign_method(&mut self, rhs: &Rational) {
                $assign_imp::$assign_method(&mut self.0, &rhs.0);
            }
        }
        impl $assign_imp<Rational> for Rational {
            fn $assign_method(&mut self, rhs: Rational) {
                $assign_imp::$assign_method(&mut self.0, rhs.0);
            }
        }
    };
}

forward_binop!(Add, add, AddAssign, add_assign);
forward_binop!(Sub, sub, SubAssign, sub_assign);
forward_binop!(Mul, mul, MulAssign, mul_assign);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl Product for Rational {
    fn product<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::one(), |acc, x| acc * x)
    }
}

impl PartialEq<i64> for Rational {
    fn eq(&self, other: &i64) -> bool {
        self.is_integer() && self.numer() == &BigInt::from(*other)
    }
}

impl PartialOrd<i64> for Rational {
    fn partial_cmp(&self, other: &i64) -> Option<Ordering> {
        self.partial_cmp(&Rational::from_integer(*other))
    }
}

/// Pochhammer symbol `(a)_k = a (a+1) ... (a+k-1)`, with `(a)_0 = 1`.
pub fn poch(a: &Rational, k: u32) -> Rational {
    let mut acc = Rational::one();
    let mut term = a.clone();
    let one = Rational::one();
    for _ in 0..k {
        if term.is_zero() {
            return Rational::zero();
        }
        acc *= &term;
        term += &one;
    }
    acc
}

/// `prod_j (params_j)_k`; the empty list gives 1.
pub fn list_poch(params: &[Rational], k: u32) -> Rational {
    params.iter().map(|p| poch(p, k)).product()
}

/// True when `(a)_j = 0` for some `j <= len`, i.e. `a` is one of
/// `0, -1, ..., -(len-1)`.
pub fn poch_vanishes_within(a: &Rational, len: u32) -> bool {
    if len == 0 || !a.is_integer() || a.is_negative() && a.numer() <= &BigInt::from(-(len as i64)) {
        return false;
    }
    !a.numer().is_positive()
}

pub fn binom(r: u32, k: u32) -> BigUint {
    if k > r {
        return BigUint::zero();
    }
    let k = k.min(r - k);
    let mut acc = BigUint::one();
    for j in 0..k {
        acc *= BigUint::from(r - j);
        acc /= BigUint::from(j + 1);
    }
    acc
}

pub fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, j| acc * BigUint::from(j))
}

/// Closed form of the terminating Gauss sum `2F1(-r, a; b; 1) = (b-a)_r / (b)_r`.
pub fn vandermonde_2f1(r: u32, a: &Rational, b: &Rational) -> Result<Rational> {
    let den = poch(b, r);
    if den.is_zero() {
        return Err(Error::PoleInParameters(format!("({b})_{r} = 0 in 2F1(-{r}, {a}; {b}; 1)")));
    }
    poch(&(b - a), r).checked_div(&den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn poch_examples() {
        assert_eq!(poch(&q("7/3"), 0), Rational::one());
        assert_eq!(poch(&q("3"), 4), q("360"));
        assert_eq!(poch(&q("1/2"), 2), q("3/4"));
        assert_eq!(poch(&q("-1"), 2), Rational::zero());
        assert_eq!(poch(&q("-3"), 3), q("-6"));
        assert_eq!(poch(&q("-3"), 4), Rational::zero());
    }

    #[test]
    fn list_poch_examples() {
        assert_eq!(list_poch(&[], 5), Rational::one());
        assert_eq!(list_poch(&[q("2"), q("3")], 2), q("72"));
        assert_eq!(list_poch(&[q("1/2")], 1), q("1/2"));
    }

    #[test]
    fn binom_examples() {
        assert_eq!(binom(9, 0), BigUint::one());
        assert_eq!(binom(4, 2), BigUint::from(6u32));
        assert_eq!(binom(3, 5), BigUint::zero());
        assert_eq!(binom(10, 7), BigUint::from(120u32));
    }

    #[test]
    fn vandermonde_examples() {
        assert_eq!(vandermonde_2f1(0, &q("5/7"), &q("-1/2")).unwrap(), Rational::one());
        assert_eq!(vandermonde_2f1(1, &q("2"), &q("5")).unwrap(), q("3/5"));
        // sum_{k=0}^{3} (-3)_k (1/2)_k / ((3)_k k!) computed term by term:
        // 1 - 1/2 + 3/16 - 1/32 = 21/32 = (5/2)_3 / (3)_3.
        let direct = q("1") - q("1/2") + q("3/16") - q("1/32");
        assert_eq!(direct, q("21/32"));
        assert_eq!(vandermonde_2f1(3, &q("1/2"), &q("3")).unwrap(), direct);
        assert!(matches!(
            vandermonde_2f1(3, &q("1"), &q("-1")),
            Err(Error::PoleInParameters(_))
        ));
    }

    #[test]
    fn vanishing_scan() {
        assert!(poch_vanishes_within(&q("0"), 1));
        assert!(!poch_vanishes_within(&q("0"), 0));
        assert!(poch_vanishes_within(&q("-2"), 3));
        assert!(!poch_vanishes_within(&q("-2"), 2));
        assert!(!poch_vanishes_within(&q("1"), 50));
        assert!(!poch_vanishes_within(&q("-1/2"), 50));
        for base in -6i64..=2 {
            for len in 0..8u32 {
                let direct = (0..=len).any(|j| poch(&Rational::from(base), j).is_zero());
                assert_eq!(poch_vanishes_within(&Rational::from(base), len), direct, "{base} {len}");
            }
        }
    }

    #[test]
    fn text_format() {
        assert_eq!(q("6/4").to_string(), "3/2");
        assert_eq!(q("-6/3").to_string(), "-2");
        assert_eq!(q(" 5 ").to_string(), "5");
        assert_eq!(q("0/7").to_string(), "0");
        assert!("1/0".parse::<Rational>().is_err());
        assert!("1/-2".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        assert!("".parse::<Rational>().is_err());
        assert!("1/".parse::<Rational>().is_err());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(q("1").checked_div(&Rational::zero()), Err(Error::DivisionByZero));
        assert_eq!(Rational::zero().recip(), Err(Error::DivisionByZero));
    }

    #[test]
    fn json_round_trip() {
        let x = q("-7/9");
        let s = serde_json::to_string(&x).unwrap();
        assert_eq!(s, "\"-7/9\"");
        let back: Rational = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
        let int: Rational = serde_json::from_str("4").unwrap();
        assert_eq!(int, q("4"));
    }
}
